//! Execution policy for the data-parallel loops.
//!
//! `Exec::Parallel` uses rayon when the crate is built with the `parallel`
//! feature and silently degrades to the sequential path otherwise. Every
//! parallel helper preserves output order, so results are identical under
//! both policies.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    /// Whether work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Ordered map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Ordered map over a slice.
    pub fn map_slice<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Calls `f(row, row_slice)` for each `width`-long row of `buf`.
    pub fn for_each_row<T, F>(self, buf: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        assert!(width > 0, "row width must be positive");
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            buf.par_chunks_mut(width)
                .enumerate()
                .for_each(|(j, row)| f(j, row));
            return;
        }
        buf.chunks_mut(width)
            .enumerate()
            .for_each(|(j, row)| f(j, row));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let a = Exec::Parallel.map_range(1000, |i| (i as f64).sqrt());
        let b = Exec::Sequential.map_range(1000, |i| (i as f64).sqrt());
        assert_eq!(a, b);

        let mut x = vec![0usize; 12];
        let mut y = x.clone();
        Exec::Parallel.for_each_row(&mut x, 4, |j, row| row.iter_mut().for_each(|v| *v = j));
        Exec::Sequential.for_each_row(&mut y, 4, |j, row| row.iter_mut().for_each(|v| *v = j));
        assert_eq!(x, y);
        assert_eq!(x[11], 2);
    }
}
