use crate::error::{BdpError, Result};
use crate::estep::{ExpectationSet, TruncationWindow};
use crate::oracle::uniformization::auto_truncation;
use crate::process::{check_params, Observation, RateModel};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

struct Piece {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

fn gauss_kronrod<F>(f: &mut F, dim: usize, a: f64, b: f64) -> Result<Piece>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for sign in nodes {
            buf.iter_mut().for_each(|v| *v = 0.0);
            f(center + sign * half * x, &mut buf)?;
            for d in 0..dim {
                kronrod[d] += wk * buf[d];
                if i % 2 == 1 {
                    gauss[d] += WG[i / 2] * buf[d];
                }
            }
        }
    }
    let value: Vec<f64> = kronrod.iter().map(|v| v * half).collect();
    let error = kronrod
        .iter()
        .zip(&gauss)
        .map(|(k, g)| ((k - g) * half).abs())
        .sum();
    Ok(Piece { a, b, value, error })
}

/// Globally adaptive 15-point Gauss-Kronrod quadrature of a vector-valued integrand.
///
/// Subdivides the interval with the largest error until the summed L1 error estimate falls
/// below `max(abs_tol, rel_tol * |I|_1)`. Returns the integral and the error estimate.
pub fn integrate_vector<F>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    if !(rel_tol > 0.0 || abs_tol > 0.0) {
        return Err(BdpError::InvalidArgument(
            "quadrature tolerance must be positive".into(),
        ));
    }
    let mut pieces = vec![gauss_kronrod(&mut f, dim, a, b)?];
    loop {
        let mut total = vec![0.0; dim];
        let mut error = 0.0;
        for p in &pieces {
            for (t, v) in total.iter_mut().zip(&p.value) {
                *t += v;
            }
            error += p.error;
        }
        let norm: f64 = total.iter().map(|v| v.abs()).sum();
        if !error.is_finite() {
            return Err(BdpError::QuadratureFailure("non-finite integrand".into()));
        }
        if error <= abs_tol.max(rel_tol * norm) {
            return Ok((total, error));
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(BdpError::QuadratureFailure(format!(
                "error estimate {error:e} above tolerance after {MAX_INTERVALS} subintervals"
            )));
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one piece");
        let piece = pieces.swap_remove(worst);
        let mid = 0.5 * (piece.a + piece.b);
        pieces.push(gauss_kronrod(&mut f, dim, piece.a, mid)?);
        pieces.push(gauss_kronrod(&mut f, dim, mid, piece.b)?);
    }
}

/// E-step by direct quadrature of the time-domain convolutions
/// `∫_0^t P_{a,k}(τ) r_k P_{k±1,b}(t-τ) dτ`, with probabilities from uniformization.
pub fn timedomain_estep(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    quad_tol: f64,
) -> Result<ExpectationSet> {
    check_params(model, theta)?;
    obs.validate(model)?;
    if !(quad_tol > 0.0) {
        return Err(BdpError::InvalidArgument(
            "quad_tol must be positive".into(),
        ));
    }
    let t = obs.t;
    let kernel = auto_truncation(model, theta, &obs.z, obs.a, obs.b, t)?;
    let (lo, hi) = (kernel.lo(), kernel.hi());
    let width = hi - lo + 1;
    let birth: Vec<f64> = (lo..=hi)
        .map(|k| {
            if k == hi {
                0.0
            } else {
                model.birth_rate(k, theta, &obs.z)
            }
        })
        .collect();
    let death: Vec<f64> = (lo..=hi)
        .map(|k| {
            if k == lo {
                0.0
            } else {
                model.death_rate(k, theta, &obs.z)
            }
        })
        .collect();
    let denom = kernel.row(obs.a, t)?[obs.b - lo];
    if !(denom > f64::MIN_POSITIVE) {
        return Err(BdpError::ZeroDenominator {
            a: obs.a,
            b: obs.b,
            t,
        });
    }
    let window = TruncationWindow {
        k_min: lo,
        k_max: hi,
        threshold: 0.0,
        hard_margin: 0,
    };
    if t == 0.0 {
        return Ok(build(
            window,
            vec![0.0; width],
            vec![0.0; width],
            vec![0.0; width],
            denom,
            t,
        ));
    }
    let (integral, _) = integrate_vector(
        |tau, out| {
            let row = kernel.row(obs.a, tau)?;
            let col = kernel.column(obs.b, t - tau)?;
            for i in 0..width {
                if i + 1 < width {
                    out[3 * i] = row[i] * birth[i] * col[i + 1];
                }
                if i > 0 {
                    out[3 * i + 1] = row[i] * death[i] * col[i - 1];
                }
                out[3 * i + 2] = row[i] * col[i];
            }
            Ok(())
        },
        3 * width,
        0.0,
        t,
        quad_tol,
        0.0,
    )?;
    let mut eu = Vec::with_capacity(width);
    let mut ed = Vec::with_capacity(width);
    let mut et = Vec::with_capacity(width);
    for c in integral.chunks(3) {
        eu.push(c[0] / denom);
        ed.push(c[1] / denom);
        et.push(c[2] / denom);
    }
    Ok(build(window, eu, ed, et, denom, t))
}

fn build(
    window: TruncationWindow,
    eu: Vec<f64>,
    ed: Vec<f64>,
    et: Vec<f64>,
    denom: f64,
    t: f64,
) -> ExpectationSet {
    let total_up = eu.iter().sum();
    let total_down = ed.iter().sum();
    let particle_time = (window.k_min..).zip(&et).map(|(k, v)| k as f64 * v).sum();
    ExpectationSet {
        window,
        eu,
        ed,
        et,
        denom,
        total_up,
        total_down,
        particle_time,
        total_time: t,
        widenings: 0,
    }
}
