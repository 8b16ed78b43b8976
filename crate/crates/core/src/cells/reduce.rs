use alloc::vec::Vec;

use super::{CellError, Vector};
use crate::arch::ReductionMode;

/// Merges one group of at most `k` frames.
///
/// A short group is averaged over what it has (MEAN) or zero-padded to `k`
/// frames (CONCAT).
pub fn reduce_group(group: &[Vector], k: usize, mode: ReductionMode) -> Result<Vector, CellError> {
    if k < 2 {
        return Err(CellError::InvalidFactor(k));
    }
    let first = group.first().ok_or(CellError::EmptyInput)?;
    let d = first.len();
    if group.len() > k {
        return Err(CellError::LengthMismatch { expected: k, found: group.len() });
    }
    if let Some(bad) = group.iter().find(|f| f.len() != d) {
        return Err(CellError::LengthMismatch { expected: d, found: bad.len() });
    }
    Ok(match mode {
        ReductionMode::Mean => {
            let n = group.len() as f64;
            (0..d).map(|j| group.iter().map(|f| f[j]).sum::<f64>() / n).collect()
        }
        ReductionMode::Concat => {
            let mut out = Vec::with_capacity(k * d);
            for f in group {
                out.extend_from_slice(f);
            }
            out.resize(k * d, 0.0);
            out.into()
        }
    })
}

/// Groups consecutive frames `k` at a time; yields `ceil(T/k)` frames.
pub fn time_reduce(frames: &[Vector], k: usize, mode: ReductionMode) -> Result<Vec<Vector>, CellError> {
    if frames.is_empty() {
        return Err(CellError::EmptyInput);
    }
    if k < 2 {
        return Err(CellError::InvalidFactor(k));
    }
    frames.chunks(k).map(|g| reduce_group(g, k, mode)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn frames(rows: &[&[f64]]) -> Vec<Vector> {
        rows.iter().map(|r| Vector::from(*r)).collect()
    }

    #[test]
    fn mean_pair() {
        let out = time_reduce(&frames(&[&[1.0, 3.0], &[5.0, 7.0]]), 2, ReductionMode::Mean).unwrap();
        assert_eq!(out, vec![Vector::from([3.0, 5.0])]);
    }

    #[test]
    fn concat_pairs() {
        let out = time_reduce(&frames(&[&[1.0], &[2.0], &[3.0], &[4.0]]), 2, ReductionMode::Concat).unwrap();
        assert_eq!(out, vec![Vector::from([1.0, 2.0]), Vector::from([3.0, 4.0])]);
    }

    #[test]
    fn tails() {
        let f = frames(&[&[1.0], &[2.0], &[3.0], &[4.0], &[6.0]]);
        let mean = time_reduce(&f, 2, ReductionMode::Mean).unwrap();
        assert_eq!(mean.last().unwrap(), &Vector::from([6.0]));
        let cat = time_reduce(&f, 3, ReductionMode::Concat).unwrap();
        assert_eq!(cat, vec![Vector::from([1.0, 2.0, 3.0]), Vector::from([4.0, 6.0, 0.0])]);
    }

    #[test]
    fn constant_frames_keep_value() {
        for k in 2..6 {
            for t in 1..12 {
                let f = vec![Vector::from([2.5, -1.0]); t];
                let out = time_reduce(&f, k, ReductionMode::Mean).unwrap();
                assert_eq!(out.len(), t.div_ceil(k));
                assert!(out.iter().all(|v| **v == [2.5, -1.0]));
            }
        }
    }

    #[test]
    fn errors() {
        assert_eq!(time_reduce(&[], 2, ReductionMode::Mean), Err(CellError::EmptyInput));
        assert_eq!(time_reduce(&frames(&[&[1.0]]), 1, ReductionMode::Mean), Err(CellError::InvalidFactor(1)));
    }
}
