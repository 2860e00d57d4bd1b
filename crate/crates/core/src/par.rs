//! Order-preserving map over independent work items, on a bounded rayon
//! pool or, without the `parallel` feature, on the calling thread.

/// Applies `f` to every item using up to `slots` workers. Results come
/// back in input order regardless of scheduling.
#[cfg(feature = "parallel")]
pub fn map_slots<T, R, F>(items: &[T], slots: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if slots <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(slots).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}), running sequentially");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_slots<T, R, F>(items: &[T], _slots: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn order_is_preserved() {
        let v: Vec<u64> = (0..500).collect();
        let want: Vec<u64> = v.iter().map(|x| x * x).collect();
        assert_eq!(super::map_slots(&v, 4, |x| x * x), want);
        assert_eq!(super::map_slots(&v, 1, |x| x * x), want);
    }
}
