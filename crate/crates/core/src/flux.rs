//! Quadratic numerical flux functions `g(ρ_L, ρ_R, q_L, q_R)` for the
//! velocity `v(q) = 1 - q`.
//!
//! All three fluxes are quadratic polynomials, so their first partials are
//! affine and their second partials are constants. The structural checks
//! below exploit that: an affine (or piecewise-affine concave) expression
//! attains its extrema over `[0,1]^4` at the 16 corners.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default numerical viscosity for the Lax-Friedrichs type fluxes.
pub const DEFAULT_ALPHA: f64 = 2.0;

/// Tolerance for the strict CFL inequality.
const STRICT_TOL: f64 = 1e-12;

const AUDIT_POINTS: usize = 1000;
const AUDIT_SEED: u64 = 0x6c77_725f_6175_6469;

#[inline]
fn velocity(q: f64) -> f64 {
    1.0 - q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FluxKind {
    #[serde(rename = "lf")]
    LaxFriedrichs,
    #[serde(rename = "godunov")]
    Godunov,
    #[serde(rename = "mlf")]
    ModifiedLaxFriedrichs,
}

impl FluxKind {
    pub const ALL: [FluxKind; 3] = [
        FluxKind::LaxFriedrichs,
        FluxKind::Godunov,
        FluxKind::ModifiedLaxFriedrichs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FluxKind::LaxFriedrichs => "lf",
            FluxKind::Godunov => "godunov",
            FluxKind::ModifiedLaxFriedrichs => "mlf",
        }
    }
}

impl fmt::Display for FluxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FluxKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lf" => Ok(FluxKind::LaxFriedrichs),
            "godunov" => Ok(FluxKind::Godunov),
            "mlf" => Ok(FluxKind::ModifiedLaxFriedrichs),
            other => Err(Error::config(format!(
                "unknown flux `{other}` (expected lf, godunov or mlf)"
            ))),
        }
    }
}

/// First partials `θ⁽ⁱ⁾ = ∂g/∂(ρ_L, ρ_R, q_L, q_R)` at one argument point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaBundle {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
}

impl ThetaBundle {
    pub fn as_array(&self) -> [f64; 4] {
        [self.theta1, self.theta2, self.theta3, self.theta4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxFunction {
    pub kind: FluxKind,
    /// Numerical viscosity; ignored by the Godunov flux.
    pub alpha: f64,
}

impl FluxFunction {
    pub fn new(kind: FluxKind, alpha: f64) -> Self {
        FluxFunction { kind, alpha }
    }

    pub fn lax_friedrichs(alpha: f64) -> Self {
        Self::new(FluxKind::LaxFriedrichs, alpha)
    }

    pub fn godunov() -> Self {
        Self::new(FluxKind::Godunov, 0.0)
    }

    pub fn modified_lax_friedrichs(alpha: f64) -> Self {
        Self::new(FluxKind::ModifiedLaxFriedrichs, alpha)
    }

    pub fn eval(&self, rho_l: f64, rho_r: f64, q_l: f64, q_r: f64) -> f64 {
        let a = self.alpha;
        match self.kind {
            FluxKind::LaxFriedrichs => {
                0.5 * (rho_l * velocity(q_l) + rho_r * velocity(q_r)) + 0.5 * a * (rho_l - rho_r)
            }
            FluxKind::Godunov => rho_l * velocity(q_r),
            FluxKind::ModifiedLaxFriedrichs => {
                0.5 * (rho_l + rho_r) * velocity(q_r) + 0.5 * a * (rho_l - rho_r)
            }
        }
    }

    /// Local two-point flux `g(ρ_L, ρ_R, ρ_L, ρ_R)`, written out directly.
    pub fn eval_local(&self, rho_l: f64, rho_r: f64) -> f64 {
        let a = self.alpha;
        match self.kind {
            FluxKind::LaxFriedrichs => {
                0.5 * (rho_l * (1.0 - rho_l) + rho_r * (1.0 - rho_r)) + 0.5 * a * (rho_l - rho_r)
            }
            FluxKind::Godunov => rho_l * (1.0 - rho_r),
            FluxKind::ModifiedLaxFriedrichs => {
                0.5 * (rho_l + rho_r) * (1.0 - rho_r) + 0.5 * a * (rho_l - rho_r)
            }
        }
    }

    pub fn partials(&self, rho_l: f64, rho_r: f64, q_l: f64, q_r: f64) -> ThetaBundle {
        let a = self.alpha;
        match self.kind {
            FluxKind::LaxFriedrichs => ThetaBundle {
                theta1: 0.5 * velocity(q_l) + 0.5 * a,
                theta2: 0.5 * velocity(q_r) - 0.5 * a,
                theta3: -0.5 * rho_l,
                theta4: -0.5 * rho_r,
            },
            FluxKind::Godunov => ThetaBundle {
                theta1: velocity(q_r),
                theta2: 0.0,
                theta3: 0.0,
                theta4: -rho_l,
            },
            FluxKind::ModifiedLaxFriedrichs => ThetaBundle {
                theta1: 0.5 * velocity(q_r) + 0.5 * a,
                theta2: 0.5 * velocity(q_r) - 0.5 * a,
                theta3: 0.0,
                theta4: -0.5 * (rho_l + rho_r),
            },
        }
    }

    /// Constant Hessian `γ_ij` in argument order `(ρ_L, ρ_R, q_L, q_R)`.
    pub fn gamma(&self) -> [[f64; 4]; 4] {
        let mut g = [[0.0; 4]; 4];
        let mut set = |i: usize, j: usize, v: f64| {
            g[i][j] = v;
            g[j][i] = v;
        };
        match self.kind {
            FluxKind::LaxFriedrichs => {
                set(0, 2, -0.5);
                set(1, 3, -0.5);
            }
            FluxKind::Godunov => set(0, 3, -1.0),
            FluxKind::ModifiedLaxFriedrichs => {
                set(0, 3, -0.5);
                set(1, 3, -0.5);
            }
        }
        g
    }

    /// Second-order Taylor expansion of `g` around `base`, evaluated at `x`.
    /// Equals `eval(x)` for every quadratic flux.
    pub fn taylor(&self, base: [f64; 4], x: [f64; 4]) -> f64 {
        let g0 = self.eval(base[0], base[1], base[2], base[3]);
        let th = self.partials(base[0], base[1], base[2], base[3]).as_array();
        let gamma = self.gamma();
        let d: Vec<f64> = (0..4).map(|i| x[i] - base[i]).collect();
        let mut acc = g0;
        for i in 0..4 {
            acc += th[i] * d[i];
            for j in 0..4 {
                acc += 0.5 * gamma[i][j] * d[i] * d[j];
            }
        }
        acc
    }

    pub fn check_assumption4(&self) -> Assumption4Report {
        let corners = corners();
        let audit = audit_points();
        let mut clauses = Vec::new();

        // (i) quadratic: the γ-Taylor expansion reproduces g exactly.
        let base = [0.3, 0.7, 0.2, 0.9];
        let quad_witness = corners
            .iter()
            .chain(audit.iter())
            .find(|x| (self.taylor(base, **x) - self.eval(x[0], x[1], x[2], x[3])).abs() > 1e-12);
        clauses.push(ClauseResult::new("i.quadratic", quad_witness.copied()));

        // (ii) consistency g(ρ, ρ, q, q) = ρ(1 - q).
        let mut consistency_witness = None;
        'grid: for a in 0..=20 {
            for b in 0..=20 {
                let (r, q) = (a as f64 / 20.0, b as f64 / 20.0);
                if (self.eval(r, r, q, q) - r * (1.0 - q)).abs() > 1e-14 {
                    consistency_witness = Some([r, r, q, q]);
                    break 'grid;
                }
            }
        }
        clauses.push(ClauseResult::new("ii.consistency", consistency_witness));

        // (iii) γ structure.
        let g = self.gamma();
        let zero_blocks = [(0, 0), (0, 1), (1, 1), (2, 2), (2, 3), (3, 3)]
            .iter()
            .all(|&(i, j)| g[i][j] == 0.0);
        let mixed = [g[0][2], g[1][2], g[0][3], g[1][3]];
        let gamma_ok = zero_blocks
            && mixed.iter().all(|&v| v <= 0.0)
            && (mixed.iter().sum::<f64>() + 1.0).abs() < 1e-15;
        clauses.push(ClauseResult {
            name: "iii.gamma_structure",
            passed: gamma_ok,
            witness: None,
        });

        // (iv) sign and coupling conditions on the partials, required over
        // the whole box.
        let (g13, g23, g24) = (g[0][2], g[1][2], g[1][3]);
        type Cond = Box<dyn Fn(&ThetaBundle, [f64; 4]) -> bool>;
        let conditions: Vec<(&'static str, Cond)> = vec![
            ("iv.theta1_nonneg", Box::new(|t, _| t.theta1 >= 0.0)),
            ("iv.theta2_nonpos", Box::new(|t, _| t.theta2 <= 0.0)),
            ("iv.theta3_nonpos", Box::new(|t, _| t.theta3 <= 0.0)),
            ("iv.theta4_nonpos", Box::new(|t, _| t.theta4 <= 0.0)),
            (
                "iv.theta1_theta3_gamma",
                Box::new(move |t, _| t.theta1 + t.theta3 + 2.0 * (g13 + g23) >= -1e-15),
            ),
            (
                "iv.theta2_gamma",
                Box::new(move |t, _| t.theta2 - 2.0 * (g23 + g24) <= 1e-15),
            ),
            (
                "iv.theta3_theta4_min",
                Box::new(|t, x| t.theta3 + t.theta4 <= -x[0].min(x[1]) + 1e-15),
            ),
        ];
        for (name, cond) in conditions {
            let witness = corners.iter().chain(audit.iter()).find(|x| {
                let t = self.partials(x[0], x[1], x[2], x[3]);
                !cond(&t, **x)
            });
            clauses.push(ClauseResult::new(name, witness.copied()));
        }

        Assumption4Report {
            flux: self.kind,
            alpha: self.alpha,
            clauses,
        }
    }

    /// `‖θ⁽ⁱ⁾‖_∞` over `[0,1]^4`, attained at a corner since each θ is affine.
    pub fn theta_sup_norms(&self) -> [f64; 4] {
        let mut sup = [0.0f64; 4];
        for x in corners() {
            let t = self.partials(x[0], x[1], x[2], x[3]).as_array();
            for i in 0..4 {
                sup[i] = sup[i].max(t[i].abs());
            }
        }
        sup
    }

    pub fn check_assumption5(&self, lambda: f64) -> Assumption5Report {
        let sup_norms = self.theta_sup_norms();
        let margin = 1.0 - lambda * sup_norms.iter().sum::<f64>();
        Assumption5Report {
            lambda,
            sup_norms,
            margin,
            ok: margin > STRICT_TOL,
        }
    }

    /// Largest CFL ratio allowed by the strict inequality (exclusive).
    pub fn max_lambda(&self) -> f64 {
        1.0 / self.theta_sup_norms().iter().sum::<f64>()
    }
}

fn corners() -> Vec<[f64; 4]> {
    (0..16u32)
        .map(|bits| std::array::from_fn(|i| f64::from((bits >> i) & 1)))
        .collect()
}

fn audit_points() -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(AUDIT_SEED);
    (0..AUDIT_POINTS)
        .map(|_| std::array::from_fn(|_| rng.gen::<f64>()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseResult {
    pub name: &'static str,
    pub passed: bool,
    /// Argument point `(ρ_L, ρ_R, q_L, q_R)` where the clause fails.
    pub witness: Option<[f64; 4]>,
}

impl ClauseResult {
    fn new(name: &'static str, witness: Option<[f64; 4]>) -> Self {
        ClauseResult {
            name,
            passed: witness.is_none(),
            witness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption4Report {
    pub flux: FluxKind,
    pub alpha: f64,
    pub clauses: Vec<ClauseResult>,
}

impl Assumption4Report {
    pub fn all_passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ClauseResult> {
        self.clauses.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption5Report {
    pub lambda: f64,
    pub sup_norms: [f64; 4],
    /// `1 - λ Σ ‖θ⁽ⁱ⁾‖_∞`
    pub margin: f64,
    pub ok: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_fluxes() -> [FluxFunction; 3] {
        [
            FluxFunction::lax_friedrichs(2.0),
            FluxFunction::godunov(),
            FluxFunction::modified_lax_friedrichs(2.0),
        ]
    }

    #[test]
    fn eval_examples() {
        assert!((FluxFunction::godunov().eval(0.5, 0.9, 0.1, 0.2) - 0.4).abs() < 1e-15);
        for f in all_fluxes() {
            assert!((f.eval(0.4, 0.4, 0.4, 0.4) - 0.24).abs() < 1e-15);
        }
        let lf = FluxFunction::lax_friedrichs(2.0);
        assert!((lf.eval(0.1, 0.6, 0.2, 0.5) - (-0.31)).abs() < 1e-15);
    }

    #[test]
    fn partial_examples() {
        let t = FluxFunction::godunov().partials(0.7, 0.1, 0.4, 0.25);
        assert_eq!(t.as_array(), [0.75, 0.0, 0.0, -0.7]);
        let t = FluxFunction::lax_friedrichs(2.0).partials(0.0, 0.0, 0.0, 0.0);
        assert_eq!(t.as_array(), [1.5, -0.5, 0.0, 0.0]);
        let t = FluxFunction::modified_lax_friedrichs(2.0).partials(0.3, 0.5, 0.9, 0.4);
        assert_eq!(t.theta3, 0.0);
        assert!((t.theta4 + 0.4).abs() < 1e-15);
    }

    #[test]
    fn partials_match_central_differences() {
        let step = 1e-6;
        for f in all_fluxes() {
            for x in audit_points() {
                let t = f.partials(x[0], x[1], x[2], x[3]).as_array();
                for i in 0..4 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[i] += step;
                    xm[i] -= step;
                    let fd = (f.eval(xp[0], xp[1], xp[2], xp[3]) - f.eval(xm[0], xm[1], xm[2], xm[3]))
                        / (2.0 * step);
                    assert!(
                        (fd - t[i]).abs() <= 1e-8 * t[i].abs().max(1.0),
                        "{:?} θ{} at {x:?}: {fd} vs {}",
                        f.kind,
                        i + 1,
                        t[i]
                    );
                }
            }
        }
    }

    #[test]
    fn theta_dependence_structure() {
        for f in all_fluxes() {
            let a = f.partials(0.1, 0.2, 0.3, 0.4);
            let b = f.partials(0.9, 0.7, 0.3, 0.4);
            assert_eq!((a.theta1, a.theta2), (b.theta1, b.theta2));
            let c = f.partials(0.1, 0.2, 0.8, 0.05);
            assert_eq!((a.theta3, a.theta4), (c.theta3, c.theta4));
        }
    }

    #[test]
    fn local_flux_matches_q_equals_rho() {
        for f in all_fluxes() {
            for x in audit_points() {
                let a = f.eval_local(x[0], x[1]);
                let b = f.eval(x[0], x[1], x[0], x[1]);
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn local_flux_is_monotone_at_corners() {
        for f in all_fluxes() {
            for x in corners() {
                let t = f.partials(x[0], x[1], x[0], x[1]);
                assert!(t.theta1 + t.theta3 >= 0.0, "{:?} {x:?}", f.kind);
                assert!(t.theta2 + t.theta4 <= 0.0, "{:?} {x:?}", f.kind);
            }
        }
    }

    #[test]
    fn assumption4_godunov_passes() {
        let r = FluxFunction::godunov().check_assumption4();
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn assumption4_lf_structure_and_signs() {
        let r = FluxFunction::lax_friedrichs(2.0).check_assumption4();
        for name in [
            "i.quadratic",
            "ii.consistency",
            "iii.gamma_structure",
            "iv.theta1_nonneg",
            "iv.theta2_nonpos",
            "iv.theta3_nonpos",
            "iv.theta4_nonpos",
            "iv.theta3_theta4_min",
        ] {
            assert!(r.clause(name).unwrap().passed, "{name}");
        }
        // Read over the full box, the coupling clauses need α ≥ 3:
        // θ⁽¹⁾ + θ⁽³⁾ + 2(γ13 + γ23) = (α - 3)/2 at ρ_L = q_L = 1.
        for alpha in [2.0, 2.9] {
            let r = FluxFunction::lax_friedrichs(alpha).check_assumption4();
            assert!(!r.clause("iv.theta1_theta3_gamma").unwrap().passed);
            assert!(!r.clause("iv.theta2_gamma").unwrap().passed);
        }
        assert!(FluxFunction::lax_friedrichs(3.0).check_assumption4().all_passed());
    }

    #[test]
    fn assumption4_lf_low_viscosity_fails_theta2_sign() {
        let r = FluxFunction::lax_friedrichs(0.5).check_assumption4();
        let c = r.clause("iv.theta2_nonpos").unwrap();
        assert!(!c.passed);
        let w = c.witness.unwrap();
        assert_eq!(w[3], 0.0, "witness {w:?}");
    }

    #[test]
    fn assumption4_mlf() {
        let r = FluxFunction::modified_lax_friedrichs(2.0).check_assumption4();
        let failed: Vec<_> = r.failures().map(|c| c.name).collect();
        assert_eq!(failed, vec!["iv.theta2_gamma"]);
        assert!(FluxFunction::modified_lax_friedrichs(3.0).check_assumption4().all_passed());
    }

    #[test]
    fn assumption5_margins() {
        let lf = FluxFunction::lax_friedrichs(2.0);
        let r = lf.check_assumption5(0.25);
        assert_eq!(r.sup_norms, [1.5, 1.0, 0.5, 0.5]);
        assert!(r.ok && (r.margin - 0.125).abs() < 1e-15);

        let r = FluxFunction::godunov().check_assumption5(0.25);
        assert_eq!(r.sup_norms, [1.0, 0.0, 0.0, 1.0]);
        assert!(r.ok && (r.margin - 0.5).abs() < 1e-15);

        let r = lf.check_assumption5(2.0 / 7.0);
        assert!(!r.ok);
        assert!(r.margin.abs() < 1e-15);

        let r = FluxFunction::modified_lax_friedrichs(2.0).check_assumption5(0.25);
        assert!((r.margin - 0.125).abs() < 1e-15);
    }

    #[test]
    fn sup_norms_match_dense_sampling() {
        for f in all_fluxes() {
            let sup = f.theta_sup_norms();
            let mut sampled = [0.0f64; 4];
            let n = 10;
            for a in 0..=n {
                for b in 0..=n {
                    for c in 0..=n {
                        for d in 0..=n {
                            let x = [a, b, c, d].map(|i| i as f64 / n as f64);
                            let t = f.partials(x[0], x[1], x[2], x[3]).as_array();
                            for i in 0..4 {
                                sampled[i] = sampled[i].max(t[i].abs());
                            }
                        }
                    }
                }
            }
            assert_eq!(sup, sampled, "{:?}", f.kind);
        }
    }

    #[test]
    fn names_round_trip() {
        for k in FluxKind::ALL {
            assert_eq!(k.name().parse::<FluxKind>().unwrap(), k);
        }
        assert!("roe".parse::<FluxKind>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unit4() -> impl Strategy<Value = [f64; 4]> {
            [0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0]
        }

        proptest! {
            #[test]
            fn taylor_expansion_is_exact(base in unit4(), x in unit4(), idx in 0usize..3, alpha in 0.0f64..4.0) {
                let f = FluxFunction::new(FluxKind::ALL[idx], alpha);
                let exact = f.eval(x[0], x[1], x[2], x[3]);
                prop_assert!((f.taylor(base, x) - exact).abs() < 1e-12);
            }

            #[test]
            fn third_differences_vanish(x in unit4(), idx in 0usize..3, dir in 0usize..4) {
                let f = FluxFunction::new(FluxKind::ALL[idx], 2.0);
                let s = 0.1;
                let at = |k: f64| {
                    let mut y = x;
                    y[dir] += k * s;
                    f.eval(y[0], y[1], y[2], y[3])
                };
                let third = at(3.0) - 3.0 * at(2.0) + 3.0 * at(1.0) - at(0.0);
                prop_assert!(third.abs() < 1e-13);
            }
        }
    }
}
