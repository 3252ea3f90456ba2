//! Weight quantization and magnitude pruning for edge deployment studies.

use super::linear::LinearProbModel;
use super::tree::{Node, SplitTest, TreeKind, TreeModel};
use crate::error::{Error, Result};

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 24;

/// Uniform symmetric quantization of one weight row to `2^bits` levels
/// spanning `[−max|w|, +max|w|]`.
fn quantize_row(row: &mut [f64], bits: u32) {
    let m = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return;
    }
    let top = ((1u64 << bits) - 1) as f64;
    let step = 2.0 * m / top;
    for w in row.iter_mut() {
        let k = ((*w + m) / step).round().clamp(0.0, top);
        *w = if k == 0.0 {
            -m
        } else if k == top {
            m
        } else {
            -m + k * step
        };
    }
}

fn check_bits(bits: u32) -> Result<()> {
    if !(MIN_BITS..=MAX_BITS).contains(&bits) {
        return Err(Error::Config(format!(
            "bit width {bits} outside {MIN_BITS}..={MAX_BITS}"
        )));
    }
    Ok(())
}

/// Models whose weight matrices can be quantized. Biases and thresholds keep
/// full precision.
pub trait QuantizeWeights: Sized {
    fn quantize_weights(&self, bits: u32) -> Result<Self>;
}

impl QuantizeWeights for LinearProbModel {
    fn quantize_weights(&self, bits: u32) -> Result<Self> {
        check_bits(bits)?;
        let mut out = self.clone();
        for mut row in out.weights.rows_mut() {
            quantize_row(row.as_slice_mut().expect("standard layout"), bits);
        }
        Ok(out)
    }
}

impl QuantizeWeights for TreeModel {
    fn quantize_weights(&self, bits: u32) -> Result<Self> {
        check_bits(bits)?;
        if self.kind != TreeKind::Oblique {
            return Err(Error::Config("only oblique trees carry weight vectors".into()));
        }
        let mut out = self.clone();
        for node in &mut out.nodes {
            if let Node::Split { test: SplitTest::Oblique { weights, .. }, .. } = node {
                quantize_row(weights, bits);
            }
        }
        Ok(out)
    }
}

pub fn quantize_weights<M: QuantizeWeights>(model: &M, bits: u32) -> Result<M> {
    model.quantize_weights(bits)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneReport {
    pub requested: f64,
    pub achieved: f64,
    pub zeroed: usize,
    pub total: usize,
}

/// Zeroes the `round(sparsity·n)` smallest-magnitude weights (one global
/// threshold across all classes).
pub fn prune_weights(model: &LinearProbModel, sparsity: f64) -> Result<(LinearProbModel, PruneReport)> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::Config(format!("sparsity must lie in [0, 1), got {sparsity}")));
    }
    let mut out = model.clone();
    let total = out.weights.len();
    let k = ((sparsity * total as f64).round() as usize).min(total);
    let flat = out.weights.as_slice_mut().expect("standard layout");
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| flat[a].abs().total_cmp(&flat[b].abs()).then(a.cmp(&b)));
    for &i in &order[..k] {
        flat[i] = 0.0;
    }
    let zeroed = flat.iter().filter(|&&w| w == 0.0).count();
    Ok((
        out,
        PruneReport {
            requested: sparsity,
            achieved: zeroed as f64 / total.max(1) as f64,
            zeroed,
            total,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Calibration;
    use ndarray::{array, Array2};

    fn model(weights: Array2<f64>) -> LinearProbModel {
        let k = weights.nrows();
        LinearProbModel {
            weights,
            biases: vec![0.1; k],
            c: 1.0,
            calibration: Calibration::Softmax,
        }
    }

    #[test]
    fn constant_row_hits_one_level() {
        let m = model(array![[0.37, 0.37, 0.37], [-2.0, -2.0, -2.0]]);
        for bits in [2, 5, 16] {
            let q = quantize_weights(&m, bits).unwrap();
            for row in q.weights.rows() {
                assert!(row.iter().all(|&w| w == row[0]));
            }
            assert_eq!(q.weights, m.weights);
        }
    }

    #[test]
    fn two_bits_gives_four_levels() {
        let m = model(array![[-1.0, -0.4, 0.1, 0.5, 1.0]]);
        let q = quantize_weights(&m, 2).unwrap();
        let levels = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
        for w in q.weights.iter() {
            assert!(levels.iter().any(|l| (l - w).abs() < 1e-12), "{w}");
        }
        assert_eq!(q.biases, m.biases);
    }

    #[test]
    fn bits_out_of_range() {
        let m = model(array![[1.0]]);
        assert!(quantize_weights(&m, 1).is_err());
        assert!(quantize_weights(&m, 25).is_err());
    }

    #[test]
    fn prune_counts() {
        let m = model(Array2::from_shape_fn((2, 5), |(i, j)| (i * 5 + j) as f64 + 1.0));
        let (same, r0) = prune_weights(&m, 0.0).unwrap();
        assert_eq!(same, m);
        assert_eq!(r0.zeroed, 0);
        let (half, r) = prune_weights(&m, 0.5).unwrap();
        assert_eq!(r.zeroed, 5);
        assert_eq!(half.weights.row(0).to_vec(), vec![0.0; 5]);
        assert!(prune_weights(&m, 1.0).is_err());
    }
}
