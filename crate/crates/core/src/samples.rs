//! Smooth, reproducible test data.
//!
//! Affine data are wave packets: Gaussians in `(b, ln a)` modulated by a
//! carrier `e^{−2πi s_c b}`.  The carrier moves the spectral mass of the
//! packet onto the interior of the log-spaced frequency grid, away from the
//! lowest sampled frequency, which is where truncation of the half-line
//! `s ∈ (0, ∞)` is felt.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expcalc::{gaussian_window, CotangentVector, DualLattice, ScalarSymbol};
use crate::group::{GroupGrid, GroupPoint};
use crate::lspace::SampledFunction;
use crate::plancherel::PlancherelPair;
use crate::quantizer::Symbol;
use crate::repfield::{OperatorField, RepOperator};
use crate::C64;

/// `A · exp(−(b−b_c)²/(2σ_b²) − (ln a − l_c)²/(2τ²)) · e^{−2πi s_c b}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WavePacket {
    pub b_c: f64,
    pub l_c: f64,
    pub s_c: f64,
    pub sigma_b: f64,
    pub tau: f64,
    pub amplitude: C64,
}

impl WavePacket {
    pub fn new(b_c: f64, l_c: f64, s_c: f64, sigma_b: f64, tau: f64) -> Self {
        WavePacket {
            b_c,
            l_c,
            s_c,
            sigma_b,
            tau,
            amplitude: C64::new(1.0, 0.0),
        }
    }

    /// Packet used by the refinement studies.
    pub fn standard() -> Self {
        WavePacket::new(0.0, 0.0, 0.2, 2.0, 0.3)
    }

    /// Unmodulated Gaussian bump.
    pub fn gaussian(b_c: f64, l_c: f64, sigma_b: f64, tau: f64) -> Self {
        WavePacket::new(b_c, l_c, 0.0, sigma_b, tau)
    }

    pub fn with_amplitude(mut self, amplitude: C64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn eval_ba(&self, b: f64, a: f64) -> C64 {
        let l = a.ln();
        let env = (-(b - self.b_c).powi(2) / (2.0 * self.sigma_b * self.sigma_b)
            - (l - self.l_c).powi(2) / (2.0 * self.tau * self.tau))
            .exp();
        self.amplitude * C64::from_polar(env, -2.0 * PI * self.s_c * b)
    }

    pub fn eval(&self, x: &GroupPoint) -> C64 {
        match *x {
            GroupPoint::Affine { b, a } => self.eval_ba(b, a),
            GroupPoint::Cyclic { .. } => C64::new(0.0, 0.0),
        }
    }

    /// Closed-form `∫ |f|² a^{-2} db da = |A|² π σ_b τ e^{τ²/4 − l_c}`.
    pub fn l2_norm_sqr(&self) -> f64 {
        self.amplitude.norm_sqr() * PI * self.sigma_b * self.tau * (self.tau * self.tau / 4.0 - self.l_c).exp()
    }

    /// Closed-form `∫ f a^{-2} db da` for an unmodulated packet.
    pub fn haar_integral_unmodulated(&self) -> C64 {
        let two_pi = 2.0 * PI;
        self.amplitude
            * (two_pi.sqrt() * self.sigma_b)
            * (two_pi.sqrt() * self.tau)
            * (self.tau * self.tau / 2.0 - self.l_c).exp()
    }

    pub fn normalized(self) -> Self {
        let n = self.l2_norm_sqr().sqrt();
        self.with_amplitude(self.amplitude / n)
    }

    pub fn sample(&self, grid: &Arc<GroupGrid>) -> SampledFunction {
        let p = *self;
        SampledFunction::from_fn(grid.clone(), move |x| p.eval(x))
    }
}

/// Sum of packets, evaluated in closed form.
pub fn packet_sum(grid: &Arc<GroupGrid>, packets: &[WavePacket]) -> SampledFunction {
    let ps = packets.to_vec();
    SampledFunction::from_fn(grid.clone(), move |x| ps.iter().map(|p| p.eval(x)).sum())
}

/// Deterministic generator for the randomised checks.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// i.i.d. entries uniform in the unit square, on any grid.
pub fn random_function(grid: &Arc<GroupGrid>, rng: &mut impl Rng) -> SampledFunction {
    let values = (0..grid.len()).map(|_| random_complex(rng)).collect();
    SampledFunction::new(grid.clone(), values).expect("length matches")
}

/// Rectangle `|b − b_c| ≤ half_b`, `|ln a − l_c| ≤ half_l` of the affine group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Patch {
    pub b_c: f64,
    pub half_b: f64,
    pub l_c: f64,
    pub half_l: f64,
}

impl Patch {
    pub fn interior() -> Self {
        Patch {
            b_c: 0.0,
            half_b: 1.0,
            l_c: 0.0,
            half_l: 0.36,
        }
    }

    /// Smooth `cos²` window, zero outside the rectangle.
    pub fn window(&self, x: &GroupPoint) -> f64 {
        let Some((b, a)) = x.affine_coords() else { return 0.0 };
        let u = (b - self.b_c) / self.half_b;
        let v = (a.ln() - self.l_c) / self.half_l;
        if u.abs() >= 1.0 || v.abs() >= 1.0 {
            return 0.0;
        }
        (0.5 * PI * u).cos().powi(2) * (0.5 * PI * v).cos().powi(2)
    }
}

/// Shape of the packets mixed by [`random_symbol`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketFamily {
    pub count: usize,
    pub sigma_b: f64,
    pub tau: f64,
    /// Carrier frequencies are drawn from `[s_lo, s_hi)`, alternating in sign.
    pub s_lo: f64,
    pub s_hi: f64,
}

impl Default for PacketFamily {
    fn default() -> Self {
        PacketFamily {
            count: 3,
            sigma_b: 2.0,
            tau: 0.2,
            s_lo: 0.15,
            s_hi: 0.22,
        }
    }
}

/// A random symbol in the range of the Plancherel transform.
///
/// On the cyclic backend every entry `A(x, ξ)` is drawn independently.  On
/// the affine backend `A(x, ·) = 𝒫(g_x)` where `g_x = Σ_q c_q(x) P_q` mixes
/// random wave packets `P_q` with coefficients that are affine in
/// `(b, ln a)` and damped by the window of `patch`, so the symbol is the
/// sampling of one continuum symbol at every refinement level.
pub fn random_symbol(pair: &PlancherelPair, seed: u64, patch: Patch, family: PacketFamily) -> Symbol {
    let mut rng = rng(seed);
    let grid = pair.grid().clone();
    let dual = pair.dual().clone();
    match grid.affine() {
        None => {
            let slices = (0..grid.len())
                .map(|_| {
                    let ops = (0..dual.len())
                        .map(|_| RepOperator::scalar(random_complex(&mut rng)))
                        .collect();
                    Some(OperatorField::new(dual.clone(), ops).expect("scalar field"))
                })
                .collect();
            Symbol::from_fields(pair.clone(), slices).expect("matching shapes")
        }
        Some(_) => {
            let mut bases = Vec::with_capacity(family.count);
            let mut coeffs = Vec::with_capacity(family.count);
            for q in 0..family.count {
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                let p = WavePacket::new(
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.1..0.1),
                    sign * rng.gen_range(family.s_lo..family.s_hi),
                    family.sigma_b,
                    family.tau,
                );
                bases.push(Arc::new(pair.plancherel_fwd(&p.sample(&grid)).expect("same grid")));
                coeffs.push([
                    random_complex(&mut rng),
                    random_complex(&mut rng),
                    random_complex(&mut rng),
                ]);
            }
            let mut sym = Symbol::zeros(pair.clone());
            for (i, x) in grid.nodes().iter().enumerate() {
                let w = patch.window(x);
                if w == 0.0 {
                    continue;
                }
                let (b, a) = x.affine_coords().expect("affine grid");
                let terms = bases
                    .iter()
                    .zip(&coeffs)
                    .map(|(f, c)| {
                        (
                            (c[0] + c[1] * (b - patch.b_c) + c[2] * (a.ln() - patch.l_c)) * w,
                            f.clone(),
                        )
                    })
                    .collect();
                sym.set_terms(i, terms);
            }
            sym
        }
    }
}

/// A random scalar symbol `B(x, 𝒳) = Σ_q c_q(x) W_q(𝒳)` on `G × 𝔤*`.
///
/// Each `W_q` is a Gaussian window in `𝔤*` centred at `(𝔶, 𝔵) = (2π s_q, 0)`
/// with widths `(1/σ_b, 1/τ)`, so its inverse exponential Fourier transform
/// is a wave packet of the given family.  Coefficients follow
/// [`random_symbol`].
pub fn random_scalar_symbol(grid: &Arc<GroupGrid>, seed: u64, patch: Patch, family: PacketFamily) -> ScalarSymbol {
    let mut rng = rng(seed);
    let lattice = DualLattice::for_grid(grid).expect("affine grid");
    let mut windows = Vec::with_capacity(family.count);
    let mut coeffs = Vec::with_capacity(family.count);
    let mut raw = Vec::with_capacity(family.count);
    for q in 0..family.count {
        let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
        let s = sign * rng.gen_range(family.s_lo..family.s_hi);
        let centre = CotangentVector {
            y: 2.0 * PI * s,
            x: 0.0,
        };
        windows.push(gaussian_window(lattice, centre, 1.0 / family.sigma_b, 1.0 / family.tau));
        raw.push([
            random_complex(&mut rng),
            random_complex(&mut rng),
            random_complex(&mut rng),
        ]);
    }
    for c in &raw {
        let values = grid
            .nodes()
            .iter()
            .map(|x| {
                let w = patch.window(x);
                if w == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                let (b, a) = x.affine_coords().expect("affine grid");
                (c[0] + c[1] * (b - patch.b_c) + c[2] * (a.ln() - patch.l_c)) * w
            })
            .collect();
        coeffs.push(values);
    }
    ScalarSymbol::from_windows(grid.clone(), windows, &coeffs).expect("matching shapes")
}
