//! Deterministic random-number plumbing.
//!
//! Every stochastic component draws from a ChaCha8 generator keyed by a
//! `(seed, stream)` pair. Independent columns and noise channels get their
//! own streams, so generated datasets are bit-identical across platforms,
//! thread counts, and unrelated configuration changes.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream carrying the latent noise added to the treatment index.
pub const STREAM_TREATMENT_NOISE: u64 = 1000;
/// Stream deciding the treatment draw given the assignment probability.
pub const STREAM_TREATMENT_DRAW: u64 = 1001;
/// Stream carrying outcome noise.
pub const STREAM_OUTCOME_NOISE: u64 = 1002;
/// Stream used to shuffle rows for train/test splits.
pub const STREAM_SPLIT: u64 = 2000;

/// Derives a well-mixed child seed from a base seed and an index.
///
/// Uses the splitmix64 finalizer, so consecutive indices land far apart.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on the open interval (0, 1).
///
/// Uses the top 53 bits plus a half-ulp offset, so 0 and 1 are impossible
/// and the result is valid input for [`inverse_normal_cdf`].
pub fn uniform_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal draw via inversion (no rejection, one u64 per draw,
/// so streams stay aligned no matter what values appear).
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    inverse_normal_cdf(uniform_open(rng))
}

/// Inverse standard normal CDF (quantile function).
///
/// Wichura's PPND16 rational approximation: absolute error below 1e-15
/// over (0, 1). Returns -inf / +inf at the closed endpoints and NaN
/// outside [0, 1].
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        // Central region: rational in q^2.
        let r = 0.180625 - q * q;
        return q * poly7(&CENTRAL_NUM, r) / poly7(&CENTRAL_DEN, r);
    }

    // Tail regions: rational in sqrt(-ln(tail mass)).
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly7(&MID_NUM, r) / poly7(&MID_DEN, r)
    } else {
        let r = r - 5.0;
        poly7(&FAR_NUM, r) / poly7(&FAR_DEN, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Degree-7 polynomial with ascending coefficients, evaluated by Horner.
fn poly7(c: &[f64; 8], r: f64) -> f64 {
    ((((((c[7] * r + c[6]) * r + c[5]) * r + c[4]) * r + c[3]) * r + c[2]) * r + c[1]) * r + c[0]
}

#[allow(clippy::excessive_precision)]
const CENTRAL_NUM: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
#[allow(clippy::excessive_precision)]
const CENTRAL_DEN: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
#[allow(clippy::excessive_precision)]
const MID_NUM: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
#[allow(clippy::excessive_precision)]
const MID_DEN: [f64; 8] = [
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
#[allow(clippy::excessive_precision)]
const FAR_NUM: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
#[allow(clippy::excessive_precision)]
const FAR_DEN: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];
