//! The four model equations written as semi-discrete systems
//! `du/dt = L u + N(u, t)` with the stiff constant-coefficient part `L`
//! separated from the explicit nonlinear part `N`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{diff_operator, BandedOperator, BcScheme, Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `u_t + a (flux)_x = u_xx + f(u) + g`
    Burgers,
    /// `u_t + u_xxxx + lambda u_xx + a (flux)_x = f(u) + g`
    #[serde(rename = "ks")]
    KuramotoSivashinsky,
    /// `u_t + (u_xx + f(u))_xx + a (flux)_x = g`
    #[serde(rename = "ch")]
    CahnHilliard,
    /// `u_t + u_xxx = a (flux)_x + f(u) + g`
    #[serde(rename = "kdv")]
    KdV,
}

impl Model {
    pub fn bc(self) -> BcScheme {
        match self {
            Model::Burgers => BcScheme::DirichletPair,
            Model::KuramotoSivashinsky | Model::CahnHilliard => BcScheme::SimplySupported,
            Model::KdV => BcScheme::KdVMixed,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Burgers => "burgers",
            Model::KuramotoSivashinsky => "ks",
            Model::CahnHilliard => "ch",
            Model::KdV => "kdv",
        }
    }

    pub fn is_fourth_order(self) -> bool {
        matches!(self, Model::KuramotoSivashinsky | Model::CahnHilliard)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxForm {
    /// `u |u|^p`, odd in `u`.
    Signed,
    /// `|u|^(p+1)`, even in `u`.
    Unsigned,
}

pub fn flux(u: f64, p: f64, form: FluxForm) -> f64 {
    let a = u.abs().powf(p);
    match form {
        FluxForm::Signed => u * a,
        FluxForm::Unsigned => u.abs() * a,
    }
}

/// d(flux)/du.
pub fn flux_derivative(u: f64, p: f64, form: FluxForm) -> f64 {
    let d = (p + 1.0) * u.abs().powf(p);
    match form {
        FluxForm::Signed => d,
        FluxForm::Unsigned => d * sign(u),
    }
}

fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `|u|^e * sgn(u)` with the value at 0 taken as 0 (also for `e <= 0`).
fn signed_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        sign(u) * u.abs().powf(e)
    }
}

fn abs_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        if e > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        u.abs().powf(e)
    }
}

/// The destabilizing source `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FSpec {
    Zero,
    /// `c u |u|^q`
    SignedPower {
        c: f64,
        q: f64,
    },
    /// `c |u|^(q+1)`
    AbsPower {
        c: f64,
        q: f64,
    },
    /// `k u^2`
    QuadraticK {
        k: f64,
    },
}

impl FSpec {
    /// Growth exponent `q` with `|f(u)| <= C (1 + |u|^(q+1))`.
    pub fn growth_exponent(&self) -> Option<f64> {
        match *self {
            FSpec::Zero => None,
            FSpec::SignedPower { q, .. } | FSpec::AbsPower { q, .. } => Some(q),
            FSpec::QuadraticK { .. } => Some(1.0),
        }
    }

    /// Same variant with exponent `q` replaced (no-op for `Zero`/`QuadraticK`).
    pub fn with_exponent(self, q: f64) -> Self {
        match self {
            FSpec::SignedPower { c, .. } => FSpec::SignedPower { c, q },
            FSpec::AbsPower { c, .. } => FSpec::AbsPower { c, q },
            other => other,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            FSpec::Zero => 0.0,
            FSpec::SignedPower { c, q } => c * u * u.abs().powf(q),
            FSpec::AbsPower { c, q } => c * u.abs().powf(q + 1.0),
            FSpec::QuadraticK { k } => k * u * u,
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            FSpec::Zero => 0.0,
            FSpec::SignedPower { c, q } => c * (q + 1.0) * abs_pow(u, q),
            FSpec::AbsPower { c, q } => c * (q + 1.0) * signed_pow(u, q),
            FSpec::QuadraticK { k } => 2.0 * k * u,
        }
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        match *self {
            FSpec::Zero => 0.0,
            FSpec::SignedPower { c, q } => c * (q + 1.0) * q * signed_pow(u, q - 1.0),
            FSpec::AbsPower { c, q } => c * (q + 1.0) * q * abs_pow(u, q - 1.0),
            FSpec::QuadraticK { k } => 2.0 * k,
        }
    }
}

pub fn nonlinearity_eval(f: &FSpec, u: f64) -> f64 {
    f.eval(u)
}

/// Value and spatial/temporal derivatives of a closed-form function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub u: f64,
    pub ut: f64,
    pub ux: f64,
    pub uxx: f64,
    pub uxxx: f64,
    pub uxxxx: f64,
}

/// Closed-form space-time functions used as manufactured solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactSolution {
    Zero,
    /// `A e^{-rt} sin(m pi (x+1)/2)`
    DecayingSine {
        amplitude: f64,
        rate: f64,
        mode: u32,
    },
    /// `A e^{-rt} (1 - x) sin(m pi (x+1)/2)`, compatible with the KdV closure.
    DecayingSineRamp {
        amplitude: f64,
        rate: f64,
        mode: u32,
    },
}

impl ExactSolution {
    pub fn jet(&self, t: f64, x: f64) -> Jet {
        match *self {
            ExactSolution::Zero => Jet::default(),
            ExactSolution::DecayingSine { amplitude, rate, mode } => {
                let amp = amplitude * (-rate * t).exp();
                let s = sine_derivatives(mode, x);
                Jet {
                    u: amp * s[0],
                    ut: -rate * amp * s[0],
                    ux: amp * s[1],
                    uxx: amp * s[2],
                    uxxx: amp * s[3],
                    uxxxx: amp * s[4],
                }
            }
            ExactSolution::DecayingSineRamp { amplitude, rate, mode } => {
                let amp = amplitude * (-rate * t).exp();
                let s = sine_derivatives(mode, x);
                let w = 1.0 - x;
                // (w s)^(n) = w s^(n) - n s^(n-1) since w' = -1
                let d = |n: usize| {
                    let lower = if n == 0 { 0.0 } else { n as f64 * s[n - 1] };
                    amp * (w * s[n] - lower)
                };
                let u = d(0);
                Jet { u, ut: -rate * u, ux: d(1), uxx: d(2), uxxx: d(3), uxxxx: d(4) }
            }
        }
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.jet(t, x).u
    }

    /// Checks the boundary conditions of `bc` at a few sample times.
    pub fn satisfies_bc(&self, bc: BcScheme) -> bool {
        const TOL: f64 = 1e-10;
        [0.0, 0.37, 1.0, 2.5].iter().all(|&t| {
            let left = self.jet(t, -1.0);
            let right = self.jet(t, 1.0);
            let scale = 1.0 + self.jet(t, 0.0).u.abs();
            let small = |v: f64| v.abs() <= TOL * scale;
            let base = small(left.u) && small(right.u);
            base && match bc {
                BcScheme::DirichletPair => true,
                BcScheme::SimplySupported => small(left.uxx) && small(right.uxx),
                BcScheme::KdVMixed => small(right.ux),
            }
        })
    }
}

/// Derivatives 0..=4 of `sin(m pi (x+1)/2)`.
fn sine_derivatives(mode: u32, x: f64) -> [f64; 5] {
    let k = mode as f64 * PI / 2.0;
    let (s, c) = (k * (x + 1.0)).sin_cos();
    [s, k * c, -k * k * s, -k.powi(3) * c, k.powi(4) * s]
}

/// Closed-form forcing terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticForcing {
    /// Steady `A sin(pi (x+1)/2)`.
    Sine { amplitude: f64 },
    /// Forcing that makes `exact` solve the continuous equation.
    Manufactured { exact: ExactSolution, equation: Box<EquationSpec> },
}

impl AnalyticForcing {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            AnalyticForcing::Sine { amplitude } => amplitude * (PI * (x + 1.0) / 2.0).sin(),
            AnalyticForcing::Manufactured { exact, equation } => {
                let j = exact.jet(t, x);
                j.ut - equation.linear_part_exact(&j) - equation.nonlinear_part_exact(&j)
            }
        }
    }
}

/// External force `g`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GSpec {
    #[default]
    Zero,
    /// Nodal samples, boundary nodes included.
    NodalSamples {
        values: Vec<f64>,
    },
    Analytic(AnalyticForcing),
}

impl GSpec {
    pub fn is_zero(&self) -> bool {
        matches!(self, GSpec::Zero)
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, GSpec::Analytic(AnalyticForcing::Manufactured { .. }))
    }
}

/// One of the four models with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub model: Model,
    /// Convective exponent.
    pub p: f64,
    /// Convection strength; `a = 0` removes the convective term.
    pub a: f64,
    pub flux_form: FluxForm,
    /// Only used by the KS model.
    pub lambda: f64,
    pub f: FSpec,
    pub g: GSpec,
}

impl EquationSpec {
    pub fn new(model: Model) -> Self {
        Self { model, p: 1.0, a: 1.0, flux_form: FluxForm::Signed, lambda: 0.0, f: FSpec::Zero, g: GSpec::Zero }
    }

    pub fn bc(&self) -> BcScheme {
        self.model.bc()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must be positive, got {}", self.p)));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidArgument(format!("a must be non-negative, got {}", self.a)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument("lambda must be finite".into()));
        }
        match self.f {
            FSpec::SignedPower { c, q } | FSpec::AbsPower { c, q } => {
                if !(q > 0.0 && q.is_finite() && c.is_finite()) {
                    return Err(Error::InvalidArgument(format!("invalid nonlinearity exponent q = {q}")));
                }
            }
            FSpec::QuadraticK { k } if !k.is_finite() => {
                return Err(Error::InvalidArgument("k must be finite".into()));
            }
            _ => {}
        }
        Ok(())
    }

    fn effective_lambda(&self) -> f64 {
        if self.model == Model::KuramotoSivashinsky {
            self.lambda
        } else {
            0.0
        }
    }

    /// `L u` for a closed-form `u`.
    fn linear_part_exact(&self, j: &Jet) -> f64 {
        match self.model {
            Model::Burgers => j.uxx,
            Model::KuramotoSivashinsky => -j.uxxxx - self.lambda * j.uxx,
            Model::CahnHilliard => -j.uxxxx,
            Model::KdV => -j.uxxx,
        }
    }

    /// `N(u)` without the forcing, for a closed-form `u`.
    fn nonlinear_part_exact(&self, j: &Jet) -> f64 {
        let conv = self.a * flux_derivative(j.u, self.p, self.flux_form) * j.ux;
        let f = &self.f;
        match self.model {
            Model::Burgers | Model::KuramotoSivashinsky => -conv + f.eval(j.u),
            Model::CahnHilliard => {
                let fxx = f.second_derivative(j.u) * j.ux * j.ux + f.derivative(j.u) * j.uxx;
                -fxx - conv
            }
            Model::KdV => conv + f.eval(j.u),
        }
    }
}

pub fn linear_operator(spec: &EquationSpec, grid: Grid) -> Result<BandedOperator> {
    spec.validate()?;
    let bc = spec.bc();
    match spec.model {
        Model::Burgers => diff_operator(grid, 2, bc),
        Model::KuramotoSivashinsky => {
            let d4 = diff_operator(grid, 4, bc)?.scaled(-1.0);
            if spec.lambda == 0.0 {
                Ok(d4)
            } else {
                d4.plus(&diff_operator(grid, 2, bc)?.scaled(-spec.lambda))
            }
        }
        Model::CahnHilliard => Ok(diff_operator(grid, 4, bc)?.scaled(-1.0)),
        Model::KdV => Ok(diff_operator(grid, 3, bc)?.scaled(-1.0)),
    }
}

/// Precomputed spatial discretization of one equation on one grid.
#[derive(Debug, Clone)]
pub struct SemiDiscrete {
    spec: EquationSpec,
    grid: Grid,
    linear: BandedOperator,
    d1: BandedOperator,
    d2: BandedOperator,
    forcing: Option<Vec<f64>>,
    work: Vec<f64>,
    work2: Vec<f64>,
}

impl SemiDiscrete {
    pub fn new(spec: &EquationSpec, grid: Grid) -> Result<Self> {
        let linear = linear_operator(spec, grid)?;
        let bc = spec.bc();
        let forcing = match &spec.g {
            GSpec::Zero => None,
            GSpec::NodalSamples { values } => {
                if values.len() != grid.n_nodes() {
                    return Err(Error::GridMismatch { expected: grid.n_nodes(), got: values.len() });
                }
                Some(values.clone())
            }
            GSpec::Analytic(a) if !spec.g.is_time_dependent() => Some(grid.sample(|x| a.eval(0.0, x))),
            GSpec::Analytic(_) => None,
        };
        Ok(Self {
            spec: spec.clone(),
            grid,
            linear,
            d1: diff_operator(grid, 1, bc)?,
            d2: diff_operator(grid, 2, bc)?,
            forcing,
            work: vec![0.0; grid.n_nodes()],
            work2: vec![0.0; grid.n_nodes()],
        })
    }

    pub fn spec(&self) -> &EquationSpec {
        &self.spec
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn linear(&self) -> &BandedOperator {
        &self.linear
    }

    /// Writes `N(u, t)` into `out` (boundary entries zero).
    pub fn nonlinear_into(&mut self, u: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let spec = &self.spec;
        let n = self.grid.n_cells();
        for (w, &v) in self.work.iter_mut().zip(u) {
            *w = flux(v, spec.p, spec.flux_form);
        }
        self.d1.apply_nodal(&self.work, out);
        let conv_sign = if spec.model == Model::KdV { spec.a } else { -spec.a };
        match spec.model {
            Model::CahnHilliard => {
                for (w, &v) in self.work.iter_mut().zip(u) {
                    *w = spec.f.eval(v);
                }
                self.d2.apply_nodal(&self.work, &mut self.work2);
                for i in 1..n {
                    out[i] = conv_sign * out[i] - self.work2[i];
                }
            }
            _ => {
                for i in 1..n {
                    out[i] = conv_sign * out[i] + spec.f.eval(u[i]);
                }
            }
        }
        match (&self.forcing, &spec.g) {
            (Some(g), _) => {
                for i in 1..n {
                    out[i] += g[i];
                }
            }
            (None, GSpec::Analytic(a)) => {
                for i in 1..n {
                    out[i] += a.eval(t, self.grid.x(i));
                }
            }
            _ => {}
        }
        out[0] = 0.0;
        out[n] = 0.0;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow);
        }
        Ok(())
    }
}

pub fn nonlinear_rhs(spec: &EquationSpec, grid: Grid, u: &Field, t: f64) -> Result<Field> {
    if u.grid() != grid {
        return Err(Error::GridMismatch { expected: grid.n_nodes(), got: u.grid().n_nodes() });
    }
    let mut sys = SemiDiscrete::new(spec, grid)?;
    let mut out = vec![0.0; grid.n_nodes()];
    sys.nonlinear_into(u.values(), t, &mut out)?;
    Field::new(grid, out)
}

/// `(D1(u|u|^p), u e^{-Lx}) - (p+1)/(p+2) L (|u|^{p+2}, e^{-Lx})`, which
/// vanishes for continuous fields with `u(±1) = 0`.
pub fn weighted_flux_residual(u: &Field, p: f64, l: f64) -> Result<f64> {
    if !(p > 0.0) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!("need p > 0 and finite L, got p={p}, L={l}")));
    }
    let grid = u.grid();
    let d1 = diff_operator(grid, 1, BcScheme::DirichletPair)?;
    let fl: Vec<f64> = u.values().iter().map(|&v| flux(v, p, FluxForm::Signed)).collect();
    let mut dfl = vec![0.0; fl.len()];
    d1.apply_nodal(&fl, &mut dfl);
    let weight = |i: usize| (-l * grid.x(i)).exp();
    let lhs: Vec<f64> = u.values().iter().enumerate().map(|(i, v)| dfl[i] * v * weight(i)).collect();
    let rhs: Vec<f64> = u.values().iter().enumerate().map(|(i, v)| v.abs().powf(p + 2.0) * weight(i)).collect();
    Ok(crate::grid::trapz(grid.h(), &lhs) - (p + 1.0) / (p + 2.0) * l * crate::grid::trapz(grid.h(), &rhs))
}

/// Forcing that turns `exact` into a solution of `spec` (its own `g` ignored).
pub fn mms_forcing(spec: &EquationSpec, exact: ExactSolution) -> Result<GSpec> {
    spec.validate()?;
    if !exact.satisfies_bc(spec.bc()) {
        return Err(Error::BoundaryViolation(spec.bc().name()));
    }
    if exact == ExactSolution::Zero {
        return Ok(GSpec::Zero);
    }
    let mut equation = spec.clone();
    equation.g = GSpec::Zero;
    equation.lambda = spec.effective_lambda();
    Ok(GSpec::Analytic(AnalyticForcing::Manufactured { exact, equation: Box::new(equation) }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn sine(x: f64) -> f64 {
        (PI * (x + 1.0) / 2.0).sin()
    }

    #[test]
    fn flux_values() {
        assert_eq!(flux(2.0, 1.0, FluxForm::Signed), 4.0);
        assert_eq!(flux(2.0, 1.0, FluxForm::Unsigned), 4.0);
        assert_eq!(flux(-2.0, 1.0, FluxForm::Signed), -4.0);
        assert_eq!(flux(-2.0, 1.0, FluxForm::Unsigned), 4.0);
        for p in [0.3, 1.0, 2.5] {
            assert_eq!(flux(0.0, p, FluxForm::Signed), 0.0);
            assert_eq!(flux(0.0, p, FluxForm::Unsigned), 0.0);
        }
    }

    #[test]
    fn nonlinearity_values() {
        assert_eq!(nonlinearity_eval(&FSpec::AbsPower { c: 1.0, q: 2.0 }, -2.0), 8.0);
        assert_eq!(nonlinearity_eval(&FSpec::SignedPower { c: 1.0, q: 2.0 }, -2.0), -8.0);
        assert_eq!(nonlinearity_eval(&FSpec::QuadraticK { k: 3.0 }, 2.0), 12.0);
        assert_eq!(nonlinearity_eval(&FSpec::Zero, 5.0), 0.0);
    }

    #[test]
    fn nonlinearity_derivatives_match_finite_differences() {
        let fs =
            [FSpec::SignedPower { c: 1.5, q: 2.0 }, FSpec::AbsPower { c: 0.7, q: 1.5 }, FSpec::QuadraticK { k: -2.0 }];
        let eps = 1e-5;
        for f in fs {
            for u in [-1.7, -0.4, 0.3, 2.2] {
                let d1 = (f.eval(u + eps) - f.eval(u - eps)) / (2.0 * eps);
                let d2 = (f.derivative(u + eps) - f.derivative(u - eps)) / (2.0 * eps);
                assert!((d1 - f.derivative(u)).abs() < 1e-6 * (1.0 + d1.abs()), "{f:?} {u}");
                assert!((d2 - f.second_derivative(u)).abs() < 1e-5 * (1.0 + d2.abs()), "{f:?} {u}");
            }
        }
    }

    #[test]
    fn model_fixes_boundary_scheme() {
        assert_eq!(EquationSpec::new(Model::Burgers).bc(), BcScheme::DirichletPair);
        assert_eq!(EquationSpec::new(Model::KuramotoSivashinsky).bc(), BcScheme::SimplySupported);
        assert_eq!(EquationSpec::new(Model::CahnHilliard).bc(), BcScheme::SimplySupported);
        assert_eq!(EquationSpec::new(Model::KdV).bc(), BcScheme::KdVMixed);
    }

    #[test]
    fn linear_operators_by_model() {
        let g = make_grid(16).unwrap();
        let d2 = diff_operator(g, 2, BcScheme::SimplySupported).unwrap();
        let d4 = diff_operator(g, 4, BcScheme::SimplySupported).unwrap();
        let mut ks = EquationSpec::new(Model::KuramotoSivashinsky);
        ks.lambda = 2.0;
        let l = linear_operator(&ks, g).unwrap();
        let n = g.n_interior();
        for r in 0..n {
            for c in 0..n {
                let expect = -d4.get(r, c) - 2.0 * d2.get(r, c);
                assert!((l.get(r, c) - expect).abs() < 1e-9 * expect.abs().max(1.0));
            }
        }
        let burgers = linear_operator(&EquationSpec::new(Model::Burgers), g).unwrap();
        assert_eq!(burgers, diff_operator(g, 2, BcScheme::DirichletPair).unwrap());
        let kdv = linear_operator(&EquationSpec::new(Model::KdV), g).unwrap();
        assert_eq!(kdv, diff_operator(g, 3, BcScheme::KdVMixed).unwrap().scaled(-1.0));
        // lambda is ignored outside KS
        let mut ch = EquationSpec::new(Model::CahnHilliard);
        ch.lambda = 5.0;
        assert_eq!(linear_operator(&ch, g).unwrap(), d4.scaled(-1.0));
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let g = make_grid(32).unwrap();
        for model in [Model::Burgers, Model::KuramotoSivashinsky, Model::CahnHilliard, Model::KdV] {
            let spec = EquationSpec::new(model);
            let n = nonlinear_rhs(&spec, g, &Field::zeros(g), 0.0).unwrap();
            assert!(n.values().iter().all(|&v| v == 0.0));
        }
    }

    fn max_interior_error(n_cells: usize, spec: &EquationSpec, u: fn(f64) -> f64, exact: impl Fn(f64) -> f64) -> f64 {
        let g = make_grid(n_cells).unwrap();
        let field = Field::from_fn(g, u).unwrap();
        let out = nonlinear_rhs(spec, g, &field, 0.0).unwrap();
        (1..n_cells).map(|i| (out.values()[i] - exact(g.x(i))).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn burgers_convection_converges_at_second_order() {
        let spec = EquationSpec::new(Model::Burgers);
        // -d/dx (u|u|) for a positive bump: -2 u u_x
        let u = sine;
        let exact = |x: f64| -2.0 * sine(x) * PI / 2.0 * (PI * (x + 1.0) / 2.0).cos();
        let e1 = max_interior_error(128, &spec, u, exact);
        let e2 = max_interior_error(256, &spec, u, exact);
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn cahn_hilliard_source_converges_at_second_order() {
        let mut spec = EquationSpec::new(Model::CahnHilliard);
        spec.a = 0.0;
        spec.f = FSpec::SignedPower { c: 1.0, q: 1.0 };
        // u = (1 - x^2)^2 > 0 inside: -(u|u|)'' = -2 (u_x^2 + u u_xx)
        let u = |x: f64| (1.0 - x * x).powi(2);
        let exact = |x: f64| {
            let v = (1.0 - x * x).powi(2);
            let vx = -4.0 * x * (1.0 - x * x);
            let vxx = 12.0 * x * x - 4.0;
            -2.0 * (vx * vx + v * vxx)
        };
        let e1 = max_interior_error(128, &spec, u, exact);
        let e2 = max_interior_error(256, &spec, u, exact);
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
    }

    #[test]
    fn exact_solutions_and_boundary_checks() {
        let s = ExactSolution::DecayingSine { amplitude: 1.0, rate: 1.0, mode: 1 };
        assert!(s.satisfies_bc(BcScheme::DirichletPair));
        assert!(s.satisfies_bc(BcScheme::SimplySupported));
        assert!(!s.satisfies_bc(BcScheme::KdVMixed));
        let r = ExactSolution::DecayingSineRamp { amplitude: 1.0, rate: 1.0, mode: 1 };
        assert!(r.satisfies_bc(BcScheme::KdVMixed));
        assert!(!r.satisfies_bc(BcScheme::SimplySupported));
        // jet derivatives against finite differences
        let eps = 1e-4;
        for e in [s, r] {
            for x in [-0.8, 0.1, 0.6] {
                let j = e.jet(0.3, x);
                let jp = e.jet(0.3, x + eps);
                let jm = e.jet(0.3, x - eps);
                assert!(((jp.u - jm.u) / (2.0 * eps) - j.ux).abs() < 1e-6);
                assert!(((jp.uxx - jm.uxx) / (2.0 * eps) - j.uxxx).abs() < 1e-5);
                assert!(((jp.uxxx - jm.uxxx) / (2.0 * eps) - j.uxxxx).abs() < 1e-4);
                let dt = (e.jet(0.3 + eps, x).u - e.jet(0.3 - eps, x).u) / (2.0 * eps);
                assert!((dt - j.ut).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mms_forcing_for_linear_burgers() {
        let mut spec = EquationSpec::new(Model::Burgers);
        spec.a = 0.0;
        let exact = ExactSolution::DecayingSine { amplitude: 1.0, rate: 1.0, mode: 1 };
        let g = mms_forcing(&spec, exact).unwrap();
        let GSpec::Analytic(a) = g else { panic!() };
        for (t, x) in [(0.0f64, 0.3), (0.7, -0.5), (2.0, 0.9)] {
            let expect = (-1.0 + PI * PI / 4.0) * (-t).exp() * sine(x);
            assert!((a.eval(t, x) - expect).abs() < 1e-12);
        }
        assert_eq!(mms_forcing(&spec, ExactSolution::Zero).unwrap(), GSpec::Zero);
        let kdv = EquationSpec::new(Model::KdV);
        assert_eq!(mms_forcing(&kdv, exact), Err(Error::BoundaryViolation("kdv-mixed")));
    }

    #[test]
    fn unsigned_flux_reflection_symmetry_of_ks_rhs() {
        // u(x) -> -u(-x) commutes with the even flux; the odd flux transports
        // in one direction only and has no such symmetry
        let g = make_grid(64).unwrap();
        let mut spec = EquationSpec::new(Model::KuramotoSivashinsky);
        spec.p = 1.5;
        spec.flux_form = FluxForm::Unsigned;
        let u = Field::from_fn(g, |x| (PI * (x + 1.0) / 2.0).sin() * (1.0 + 0.4 * x)).unwrap();
        let reflected = Field::new(g, u.values().iter().rev().map(|v| -v).collect()).unwrap();
        let n1 = nonlinear_rhs(&spec, g, &u, 0.0).unwrap();
        let n2 = nonlinear_rhs(&spec, g, &reflected, 0.0).unwrap();
        for (a, b) in n1.values().iter().zip(n2.values().iter().rev()) {
            assert!((a + b).abs() < 1e-10);
        }
    }

    #[test]
    fn weighted_flux_identity_residual_converges() {
        let r = |n| {
            let u = Field::from_fn(make_grid(n).unwrap(), sine).unwrap();
            weighted_flux_residual(&u, 1.0, 1.0).unwrap().abs()
        };
        assert!(r(256) < 1e-4, "{}", r(256));
        assert!((r(128) / r(256)).log2() >= 1.8);
        let zero = Field::zeros(make_grid(16).unwrap());
        assert_eq!(weighted_flux_residual(&zero, 2.0, 3.0).unwrap(), 0.0);
    }
}
