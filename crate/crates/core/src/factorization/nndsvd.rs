//! Non-negative double SVD initialization.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::truncated_svd;

/// What to do with the zeros NNDSVD leaves in `W` and `H`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NndsvdFill {
    /// Keep exact zeros.
    #[default]
    Zeros,
    /// Replace zeros with the mean of the input matrix.
    Mean,
    /// Replace zeros with small seeded random values in `[0, mean / 100)`.
    Random,
}

/// Values below this are snapped to zero after initialization.
const SNAP: f64 = 1e-6;

fn split_signs(x: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    (x.mapv(|v| v.max(0.0)), x.mapv(|v| (-v).max(0.0)))
}

fn norm(x: &Array1<f64>) -> f64 {
    x.dot(x).sqrt()
}

/// Returns `(W, H)` with `W: m x p`, `H: p x n`.
pub fn nndsvd(v: &Array2<f64>, p: usize, fill: NndsvdFill, seed: u64) -> Result<(Array2<f64>, Array2<f64>)> {
    let (m, n) = v.dim();
    let svd = truncated_svd(v.view(), p)?;
    let mut w = Array2::zeros((m, p));
    let mut h = Array2::zeros((p, n));

    // The leading singular vectors of a non-negative matrix can be taken
    // non-negative.
    let s0 = svd.s[0].sqrt();
    w.column_mut(0).assign(&svd.u.column(0).mapv(|x| s0 * x.abs()));
    h.row_mut(0).assign(&svd.vt.row(0).mapv(|x| s0 * x.abs()));

    for j in 1..p {
        let (xp, xn) = split_signs(svd.u.column(j));
        let (yp, yn) = split_signs(svd.vt.row(j));
        let (xpn, xnn, ypn, ynn) = (norm(&xp), norm(&xn), norm(&yp), norm(&yn));
        let (mp, mn) = (xpn * ypn, xnn * ynn);
        let (u, vv, sigma) = if mp >= mn {
            (xp / xpn.max(f64::MIN_POSITIVE), yp / ypn.max(f64::MIN_POSITIVE), mp)
        } else {
            (xn / xnn.max(f64::MIN_POSITIVE), yn / ynn.max(f64::MIN_POSITIVE), mn)
        };
        let lambda = (svd.s[j] * sigma).sqrt();
        w.column_mut(j).assign(&(u * lambda));
        h.row_mut(j).assign(&(vv * lambda));
    }

    w.mapv_inplace(|x| if x < SNAP { 0.0 } else { x });
    h.mapv_inplace(|x| if x < SNAP { 0.0 } else { x });

    let mean = v.mean().unwrap_or(0.0);
    match fill {
        NndsvdFill::Zeros => {}
        NndsvdFill::Mean => {
            w.mapv_inplace(|x| if x == 0.0 { mean } else { x });
            h.mapv_inplace(|x| if x == 0.0 { mean } else { x });
        }
        NndsvdFill::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for x in w.iter_mut().chain(h.iter_mut()) {
                if *x == 0.0 {
                    *x = mean * rng.random::<f64>() / 100.0;
                }
            }
        }
    }
    Ok((w, h))
}
