use nalgebra::DMatrix;
use num_complex::Complex64;

/// Singular values below this fraction of the largest are dropped.
pub const PINV_RTOL: f64 = 1e-10;

/// Moore–Penrose pseudoinverse through the complex SVD.
pub fn pinv(g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (rows, cols) = g.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = g.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᴴ");
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = PINV_RTOL * s_max;
    let mut out = DMatrix::zeros(cols, rows);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cut || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        // V[:, i] = conj(Vᴴ[i, :]), U[:, i]ᴴ
        for c in 0..cols {
            let vi = v_t[(i, c)].conj() * inv;
            for r in 0..rows {
                out[(c, r)] += vi * u[(r, i)].conj();
            }
        }
    }
    out
}
