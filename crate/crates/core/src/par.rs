//! Execution strategy for the data-parallel inner loops (grid enumeration,
//! creep scans, instance search).
//!
//! With the `parallel` feature the [`Execution::Parallel`] strategy runs on
//! the rayon pool; without it every strategy runs sequentially. Results are
//! always returned in input order, so the choice never changes output.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Order-preserving `filter_map` over a slice.
    pub fn filter_map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Option<R> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().filter_map(f).collect();
        }
        items.iter().filter_map(f).collect()
    }

    /// Order-preserving `map` over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.filter_map(items, |x| Some(f(x)))
    }

    /// Returns some item satisfying `f`; the leftmost one when several do.
    pub fn find_first<T, F>(self, items: &[T], f: F) -> Option<&T>
    where
        T: Sync,
        F: Fn(&T) -> bool + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().find_first(|x| f(x));
        }
        items.iter().find(|x| f(x))
    }
}
