//! Small shared utilities: seed derivation, deterministic parallel maps,
//! quadrature, and CSV emission helpers.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// splitmix64 step; used to derive independent sub-seeds from a base seed.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed from `base` and a stream tag. Stable across runs and
/// platforms, unlike hashing with `DefaultHasher`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut s = base ^ 0x6a09e667f3bcc908u64.wrapping_mul(stream.wrapping_add(1));
    let a = splitmix64(&mut s);
    splitmix64(&mut s) ^ a.rotate_left(17)
}

/// The RNG used everywhere; explicit so streams stay reproducible.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Run `f` over `0..n`, collecting results in index order. With `jobs <= 1`
/// this is a plain serial loop; otherwise items are claimed from a shared
/// counter by `jobs` worker threads. Output order is always by index, so any
/// later reduction is independent of thread scheduling.
pub fn parallel_map_indexed<T, F>(jobs: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if jobs <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let workers = jobs.min(n);
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let next = AtomicUsize::new(0);
    let slots_ptr = SendPtr(slots.as_mut_ptr());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let f = &f;
            let next = &next;
            let slots_ptr = &slots_ptr;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                // Each index is claimed exactly once, so the write is unaliased.
                unsafe { *slots_ptr.0.add(i) = Some(out) };
            });
        }
    });
    slots.into_iter().map(|s| s.unwrap()).collect()
}

struct SendPtr<T>(*mut Option<T>);
unsafe impl<T: Send> Sync for SendPtr<T> {}

/// Composite trapezoid rule over uniformly spaced samples.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    step * (0.5 * values[0] + interior + 0.5 * values[values.len() - 1])
}

/// Trapezoid quadrature of `f` over `[lo, hi]` with `n` points (n >= 2).
pub fn quadrature<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let step = (hi - lo) / (n - 1) as f64;
    let values: Vec<f64> = (0..n).map(|i| f(lo + i as f64 * step)).collect();
    trapezoid(&values, step)
}

/// Write rows of f64 columns as CSV with a one-line header. Floats use Rust's
/// shortest round-trip formatting, which is bit-stable across runs.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                write!(out, ",")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// CSV writer for rows that mix text and numeric columns.
pub fn write_csv_records(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
