use crate::linalg::{dot, softmax, Mat};

/// Forward cache of one attention pooling step.
#[derive(Debug, Clone)]
pub struct Attended {
    pub context: Vec<f64>,
    pub weights: Vec<f64>,
    /// `tanh(W vᵢ)` per input.
    hidden: Vec<Vec<f64>>,
}

/// Additive attention: `αᵢ = softmax(qᵀ tanh(W vᵢ))`, context `Σ αᵢ vᵢ`.
///
/// Panics on an empty input; callers validate lengths first.
pub fn attend(vectors: &[Vec<f64>], w: &Mat, query: &[f64]) -> Attended {
    assert!(!vectors.is_empty(), "attention over an empty sequence");
    let hidden: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| w.matvec(v).into_iter().map(f64::tanh).collect())
        .collect();
    let scores: Vec<f64> = hidden.iter().map(|a| dot(query, a)).collect();
    let weights = softmax(&scores);
    let mut context = vec![0.0; vectors[0].len()];
    for (v, a) in vectors.iter().zip(&weights) {
        for (c, x) in context.iter_mut().zip(v) {
            *c += a * x;
        }
    }
    Attended {
        context,
        weights,
        hidden,
    }
}

/// Gradients of an attention step given `∂L/∂context`.
pub struct AttentionGrad {
    pub d_vectors: Vec<Vec<f64>>,
    pub d_query: Vec<f64>,
}

/// Backward pass. Accumulates `∂L/∂W` into `dw` and returns the gradients with
/// respect to the inputs and the query.
pub fn attend_backward(
    vectors: &[Vec<f64>],
    w: &Mat,
    query: &[f64],
    fwd: &Attended,
    d_context: &[f64],
    dw: &mut Mat,
) -> AttentionGrad {
    let n = vectors.len();
    let d_weight: Vec<f64> = vectors.iter().map(|v| dot(d_context, v)).collect();
    let mean: f64 = fwd.weights.iter().zip(&d_weight).map(|(a, g)| a * g).sum();
    let mut d_vectors: Vec<Vec<f64>> = fwd
        .weights
        .iter()
        .map(|a| d_context.iter().map(|g| a * g).collect())
        .collect();
    let mut d_query = vec![0.0; query.len()];
    for i in 0..n {
        let d_score = fwd.weights[i] * (d_weight[i] - mean);
        if d_score == 0.0 {
            continue;
        }
        let a = &fwd.hidden[i];
        for (q, h) in d_query.iter_mut().zip(a) {
            *q += d_score * h;
        }
        let d_pre: Vec<f64> = query
            .iter()
            .zip(a)
            .map(|(q, h)| d_score * q * (1.0 - h * h))
            .collect();
        dw.add_outer(1.0, &d_pre, &vectors[i]);
        let dv = w.matvec_t(&d_pre);
        for (x, g) in d_vectors[i].iter_mut().zip(dv) {
            *x += g;
        }
    }
    AttentionGrad { d_vectors, d_query }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut x = seed as f64;
        Mat::from_fn(rows, cols, |_, _| {
            x = (x * 1.37 + 0.71).fract() + 0.13;
            x - 0.6
        })
    }

    #[test]
    fn singleton_gets_full_weight() {
        let v = vec![vec![0.3, -1.0, 2.0]];
        let out = attend(&v, &mat(3, 3, 1), &[0.5, 0.1, -0.2]);
        assert_eq!(out.weights, vec![1.0]);
        assert_eq!(out.context, v[0]);
    }

    #[test]
    fn identical_inputs_are_uniform() {
        let v = vec![vec![0.3, -1.0]; 4];
        let out = attend(&v, &mat(2, 2, 2), &[1.0, 2.0]);
        assert!(out.weights.iter().all(|w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let v: Vec<Vec<f64>> = (0..3).map(|i| mat(1, 4, i + 3).data).collect();
        let w = mat(4, 4, 9);
        let q = mat(1, 4, 5).data;
        let g = [0.7, -0.2, 0.4, 1.1];
        let loss = |v: &[Vec<f64>], w: &Mat, q: &[f64]| dot(&attend(v, w, q).context, &g);
        let fwd = attend(&v, &w, &q);
        let mut dw = Mat::zeros(4, 4);
        let back = attend_backward(&v, &w, &q, &fwd, &g, &mut dw);
        let h = 1e-6;
        for i in 0..3 {
            for k in 0..4 {
                let mut up = v.clone();
                up[i][k] += h;
                let mut dn = v.clone();
                dn[i][k] -= h;
                let num = (loss(&up, &w, &q) - loss(&dn, &w, &q)) / (2.0 * h);
                assert!((num - back.d_vectors[i][k]).abs() < 1e-8);
            }
        }
        for k in 0..16 {
            let mut up = w.clone();
            up.data[k] += h;
            let mut dn = w.clone();
            dn.data[k] -= h;
            let num = (loss(&v, &up, &q) - loss(&v, &dn, &q)) / (2.0 * h);
            assert!((num - dw.data[k]).abs() < 1e-8);
        }
        for k in 0..4 {
            let mut up = q.clone();
            up[k] += h;
            let mut dn = q.clone();
            dn[k] -= h;
            let num = (loss(&v, &w, &up) - loss(&v, &w, &dn)) / (2.0 * h);
            assert!((num - back.d_query[k]).abs() < 1e-8);
        }
    }
}
