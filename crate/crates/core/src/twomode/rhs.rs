use num_complex::Complex64;

use super::moments::{moment_index, ModeMoments, MomentState, MAX_ORDER, MOMENTS_PER_MODE, STATE_LEN};
use super::{ModeLabel, ModeParams, TwoModeParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Time derivative of every moment of one mode.
///
/// For `O = P^n X^m` (with `[X, P] = 2i`):
/// * free rotation `-n w (<P^(n-1) X^(m+1)> + i(n-1)<P^(n-2) X^m>)
///   + m w (<P^(n+1) X^(m-1)> + i(m-1)<P^n X^(m-2)>)`,
/// * thermal damping `-(k/2)(n+m)<O> + (k/2)(2n_th+1)(n(n-1)<P^(n-2)X^m>
///   + m(m-1)<P^n X^(m-2)>) - i k n m <P^(n-1) X^(m-1)>`, the last term
///   coming from reordering `X` past `P`,
/// * sideband drive with coupling `g`: `-g n <s+ + s-> <P^(n-1) X^m>
///   + i g m <s- - s+> <P^n X^(m-1)>`.
fn mode_derivative(
    m: &ModeMoments,
    mode: &ModeParams,
    g: f64,
    sigma_minus: Complex64,
    out: &mut [Complex64; MOMENTS_PER_MODE],
) {
    let w = mode.omega;
    let k = mode.kappa;
    let diff = 0.5 * k * (2.0 * mode.n_th + 1.0);
    let s_sum = 2.0 * sigma_minus.re; // <s+ + s->
    let s_diff = Complex64::new(0.0, 2.0 * sigma_minus.im); // <s- - s+>
    for order in 1..=MAX_ORDER {
        for n in 0..=order {
            let mm = order - n;
            let (ni, mi) = (n as isize, mm as isize);
            let (nf, mf) = (n as f64, mm as f64);
            let mut d = Complex64::new(0.0, 0.0);
            if n > 0 {
                d -= nf * w * (m.get(ni - 1, mi + 1) + I * (nf - 1.0) * m.get(ni - 2, mi));
                d -= g * nf * s_sum * m.get(ni - 1, mi);
            }
            if mm > 0 {
                d += mf * w * (m.get(ni + 1, mi - 1) + I * (mf - 1.0) * m.get(ni, mi - 2));
                d += I * g * mf * s_diff * m.get(ni, mi - 1);
            }
            d -= 0.5 * k * (nf + mf) * m.get(ni, mi);
            d += diff * (nf * (nf - 1.0) * m.get(ni - 2, mi) + mf * (mf - 1.0) * m.get(ni, mi - 2));
            d -= I * k * nf * mf * m.get(ni - 1, mi - 1);
            out[moment_index(n, mm)] = d;
        }
    }
}

/// Derivative of the flattened state (see [`MomentState::to_vec`]).
pub(crate) fn rhs_flat(params: &TwoModeParams, y: &[f64], dy: &mut [f64]) {
    debug_assert_eq!(y.len(), STATE_LEN);
    let st = MomentState::from_slice(0.0, y);
    let mut buf = [Complex64::new(0.0, 0.0); MOMENTS_PER_MODE];
    // sum_q g_q <a_q^dag> with <a^dag> = (<X> - i<P>)/2.
    let mut field = Complex64::new(0.0, 0.0);
    for q in ModeLabel::BOTH {
        let g = params.coupling(q);
        let m = st.mode(q);
        mode_derivative(m, params.mode(q), g, st.sigma_minus, &mut buf);
        let base = 2 * MOMENTS_PER_MODE * q.index();
        for (i, c) in buf.iter().enumerate() {
            dy[base + 2 * i] = c.re;
            dy[base + 2 * i + 1] = c.im;
        }
        field += g * 0.5 * (m.get(0, 1) - I * m.get(1, 0));
    }
    let sm = st.sigma_minus;
    let sz = st.sigma_z;
    let dsm = (I * params.delta - 0.5 * params.gamma) * sm + I * sz * field;
    // -2i (z - z*) with z = <s+> sum_q g_q <a_q^dag>.
    let z = sm.conj() * field;
    let dsz = -params.gamma * (sz + 1.0) + 4.0 * z.im;
    let a = 4 * MOMENTS_PER_MODE;
    dy[a] = dsm.re;
    dy[a + 1] = dsm.im;
    dy[a + 2] = dsz;
}

/// Time derivative of the full moment state under mean-field closure.
pub fn moment_rhs(state: &MomentState, params: &TwoModeParams) -> MomentState {
    let y = state.to_vec();
    let mut dy = vec![0.0; STATE_LEN];
    rhs_flat(params, &y, &mut dy);
    let mut d = MomentState::from_slice(state.t, &dy);
    d.t = 1.0;
    d
}
