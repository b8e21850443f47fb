use rayon::prelude::*;

/// Maps `f` over `items` on at most `workers` threads (all cores when
/// `None`), preserving input order in the output.
pub fn bounded_map<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let run = || items.par_iter().map(&f).collect::<Vec<R>>();
    match workers {
        Some(1) => items.iter().map(&f).collect(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(_) => items.iter().map(&f).collect(),
        },
        None => run(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_worker_count() {
        let xs: Vec<u64> = (0..200).collect();
        for w in [None, Some(1), Some(3)] {
            let ys = bounded_map(&xs, w, |x| x * x);
            assert_eq!(ys, xs.iter().map(|x| x * x).collect::<Vec<_>>());
        }
    }
}
