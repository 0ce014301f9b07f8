use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::elliptic;
use super::grid::QuadratureGrid;
use super::neohookean::{self, FieldDerivatives, Material};
use crate::autodiff::{self, Differentiable, Dual, Real, Scalar, Tape, Var, LANES};
use crate::error::{Error, Result};
use crate::network::{self, JetLayout, NetworkJets, NetworkSpec};
use crate::rng::StreamRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Drm1d,
    Pinn1d,
    Drm2d,
    Pinn2d,
}

impl ObjectiveKind {
    pub fn dim(self) -> usize {
        match self {
            ObjectiveKind::Drm1d | ObjectiveKind::Pinn1d => 1,
            ObjectiveKind::Drm2d | ObjectiveKind::Pinn2d => 2,
        }
    }

    /// Energy objectives can be negative; residual objectives cannot.
    pub fn is_energy(self) -> bool {
        matches!(self, ObjectiveKind::Drm1d | ObjectiveKind::Drm2d)
    }

    /// Highest spatial derivative the integrand needs.
    pub fn spatial_order(self) -> usize {
        if self.is_energy() {
            1
        } else {
            2
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Drm1d => "drm1d",
            ObjectiveKind::Pinn1d => "pinn1d",
            ObjectiveKind::Drm2d => "drm2d",
            ObjectiveKind::Pinn2d => "pinn2d",
        }
    }
}

/// Right-hand side of the boundary-value problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// The source (1D) or body force (2D) generated by the manufactured solution.
    #[default]
    Manufactured,
    Zero,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Integration {
    #[default]
    FixedGrid,
    /// Fresh i.i.d. uniform points on every call.
    MonteCarlo { batch: usize },
}

/// Integration points with the source evaluated at each of them.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub grid: QuadratureGrid,
    sources: Vec<[f64; 2]>,
}

/// A loss over network parameters: one of the four objective kinds on its
/// quadrature rule.
#[derive(Clone, Debug)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub spec: NetworkSpec,
    pub material: Material,
    pub alpha: f64,
    pub source: Source,
    pub integration: Integration,
    /// Lower bound for J inside logarithms; `None` lets inverted states go non-finite.
    pub clamp: Option<f64>,
    fixed: Quadrature,
}

impl Objective {
    /// Objective on the reference grid of its problem (100 midpoints in 1D,
    /// 20 × 50 polar cells in 2D).
    pub fn new(kind: ObjectiveKind, spec: NetworkSpec) -> Result<Self> {
        let grid = match kind.dim() {
            1 => QuadratureGrid::midpoint_1d(100),
            _ => QuadratureGrid::polar_disk(20, 50),
        };
        Self::with_grid(kind, spec, grid)
    }

    pub fn with_grid(kind: ObjectiveKind, spec: NetworkSpec, grid: QuadratureGrid) -> Result<Self> {
        spec.validate()?;
        if spec.input_dim != kind.dim() || spec.output_dim != kind.dim() {
            return Err(Error::Config(format!(
                "{} needs a {d}→{d} network, got {}→{}",
                kind.name(),
                spec.input_dim,
                spec.output_dim,
                d = kind.dim()
            )));
        }
        if grid.dim != kind.dim() || grid.is_empty() {
            return Err(Error::Config(format!("{} needs a nonempty {}D grid", kind.name(), kind.dim())));
        }
        let mut objective = Self {
            kind,
            spec,
            material: Material::default(),
            alpha: 1.0,
            source: Source::Manufactured,
            integration: Integration::FixedGrid,
            clamp: None,
            fixed: Quadrature { grid: QuadratureGrid { dim: kind.dim(), points: vec![], weights: vec![] }, sources: vec![] },
        };
        objective.fixed = objective.quadrature(grid);
        Ok(objective)
    }

    /// Reconfigures the problem data, rebuilding cached source values.
    pub fn with_problem(mut self, material: Material, alpha: f64, source: Source) -> Self {
        self.material = material;
        self.alpha = alpha;
        self.source = source;
        let grid = std::mem::replace(&mut self.fixed.grid, QuadratureGrid { dim: 0, points: vec![], weights: vec![] });
        self.fixed = self.quadrature(grid);
        self
    }

    pub fn with_clamp(mut self, clamp: Option<f64>) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn with_integration(mut self, integration: Integration) -> Result<Self> {
        if let Integration::MonteCarlo { batch: 0 } = integration {
            return Err(Error::Config("Monte Carlo batch size must be positive".into()));
        }
        self.integration = integration;
        Ok(self)
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.fixed.grid
    }

    pub fn fixed_quadrature(&self) -> &Quadrature {
        &self.fixed
    }

    /// Source term (1D, in component 0) or body force (2D) at `point`.
    pub fn source_at(&self, point: &[f64; 2]) -> [f64; 2] {
        match (self.source, self.kind.dim()) {
            (Source::Zero, _) => [0.0, 0.0],
            (Source::Manufactured, 1) => [elliptic::source_1d(point[0]), 0.0],
            (Source::Manufactured, _) => neohookean::body_force_2d(point, &self.material, self.alpha),
        }
    }

    pub fn quadrature(&self, grid: QuadratureGrid) -> Quadrature {
        let sources = grid.points.iter().map(|p| self.source_at(p)).collect();
        Quadrature { grid, sources }
    }

    /// Fresh uniform sample of `batch` points.
    pub fn sample(&self, batch: usize, rng: &mut StreamRng) -> Quadrature {
        let grid = match self.kind.dim() {
            1 => QuadratureGrid::monte_carlo_1d(batch, rng),
            _ => QuadratureGrid::monte_carlo_disk(batch, rng),
        };
        self.quadrature(grid)
    }

    /// The rule used by one optimizer step or stochastic query: the fixed grid,
    /// or a fresh sample in Monte Carlo mode.
    pub fn step_quadrature(&self, rng: &mut StreamRng) -> Cow<'_, Quadrature> {
        match self.integration {
            Integration::FixedGrid => Cow::Borrowed(&self.fixed),
            Integration::MonteCarlo { batch } => Cow::Owned(self.sample(batch, rng)),
        }
    }

    fn check_params(&self, len: usize) -> Result<()> {
        let expected = self.param_count();
        if len != expected {
            return Err(Error::Dimension { what: "parameter vector length", expected, got: len });
        }
        Ok(())
    }

    /// Loss on the fixed grid.
    pub fn evaluate(&self, params: &[f64]) -> Result<f64> {
        self.evaluate_on(&self.fixed, params)
    }

    /// Loss under the configured integration mode.
    pub fn evaluate_stochastic(&self, params: &[f64], rng: &mut StreamRng) -> Result<f64> {
        let q = self.step_quadrature(rng);
        self.evaluate_on(&q, params)
    }

    pub fn evaluate_on(&self, q: &Quadrature, params: &[f64]) -> Result<f64> {
        let values = self.integrand_on(q, params)?;
        Ok(q.grid.integrate(&values))
    }

    /// Pointwise integrand on the fixed grid.
    pub fn integrand_values(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.integrand_on(&self.fixed, params)
    }

    fn integrand_on(&self, q: &Quadrature, params: &[f64]) -> Result<Vec<f64>> {
        self.check_params(params.len())?;
        let jets = NetworkJets::<f64>::forward(&self.spec, params, &q.grid.points, self.kind.spatial_order());
        let nout = self.spec.output_dim;
        let mut values = Vec::with_capacity(q.grid.len());
        for p in 0..q.grid.len() {
            let comps: Vec<&[f64]> = (0..nout).map(|o| jets.output(o, p)).collect();
            let g = self.density(&comps, jets.layout, q.sources[p]);
            if !g.is_finite() {
                return Err(self.non_finite_at(q, p));
            }
            values.push(g);
        }
        Ok(values)
    }

    /// Variance of the integrand under the normalized quadrature measure.
    pub fn integrand_variance(&self, params: &[f64]) -> Result<f64> {
        let values = self.integrand_values(params)?;
        let total = self.fixed.grid.total_weight();
        let mean = self.fixed.grid.integrate(&values) / total;
        let second: f64 = self.fixed.grid.weights.iter().zip(&values).map(|(w, g)| w * (g - mean) * (g - mean)).sum();
        Ok(second / total)
    }

    pub fn value_and_grad_on(&self, q: &Quadrature, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.loss_and_grad::<f64>(q, params)
    }

    /// Gradients of the loss for several tangent directions at once; returns
    /// the loss, its gradient and `H v` per direction.
    pub fn hvp_on(&self, q: &Quadrature, params: &[f64], directions: &[Vec<f64>]) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        let seeded = autodiff::seed_lanes(params, directions)?;
        let (loss, grad) = self.loss_and_grad::<Dual<LANES>>(q, &seeded)?;
        let plain = grad.iter().map(|g| g.re).collect();
        Ok((loss.re, plain, autodiff::unseed_lanes(&grad, directions.len())))
    }

    /// Loss and parameter gradient, generic over the parameter number type.
    fn loss_and_grad<T: Real>(&self, q: &Quadrature, params: &[T]) -> Result<(T, Vec<T>)> {
        self.check_params(params.len())?;
        let points = &q.grid.points;
        let jets = NetworkJets::<T>::forward(&self.spec, params, points, self.kind.spatial_order());
        let layout = jets.layout;
        let m = layout.ncomp();
        let np = points.len();
        let nout = self.spec.output_dim;
        let mut out_bar = vec![T::zero(); jets.out.len()];
        let mut loss = T::zero();
        let mut tape = Tape::<T>::with_capacity(256);
        for p in 0..np {
            tape.clear();
            let w = q.grid.weights[p];
            let (g, adjoints) = {
                let vars: Vec<Var<'_, T>> = (0..nout).flat_map(|o| jets.output(o, p).iter().map(|&c| tape.var(c))).collect();
                let comps: Vec<&[Var<'_, T>]> = vars.chunks(m).collect();
                let g = self.density(&comps, layout, q.sources[p]);
                let adj = tape.adjoints(&g);
                (g.value(), vars.iter().map(|v| adj[v.index()]).collect::<Vec<T>>())
            };
            if !g.primal().is_finite() {
                return Err(self.non_finite_at(q, p));
            }
            loss += g * w;
            for o in 0..nout {
                for c in 0..m {
                    out_bar[(o * np + p) * m + c] = adjoints[o * m + c] * w;
                }
            }
        }
        let grad = jets.backward(&self.spec, params, points, &out_bar);
        Ok((loss, grad))
    }

    fn non_finite_at(&self, q: &Quadrature, p: usize) -> Error {
        Error::NonFinite { point: Some(p), coords: Some(q.grid.coords(p)) }
    }

    /// Pointwise integrand from the output jets at one point.
    fn density<S: Scalar>(&self, comps: &[&[S]], layout: JetLayout, source: [f64; 2]) -> S {
        match self.kind {
            ObjectiveKind::Drm1d => elliptic::drm_density(comps[0][0], comps[0][layout.grad(0)], source[0]),
            ObjectiveKind::Pinn1d => elliptic::pinn_density(comps[0][layout.hess(0, 0)], source[0]),
            ObjectiveKind::Drm2d => {
                let field = field_derivatives(comps, layout);
                neohookean::drm_density(&self.material, &field, source, self.clamp)
            }
            ObjectiveKind::Pinn2d => {
                let field = field_derivatives(comps, layout);
                neohookean::pinn_density(&self.material, &field, source, self.clamp)
            }
        }
    }

    /// Network field values at `points`, `[output][point]`.
    pub fn field(&self, params: &[f64], points: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
        self.check_params(params.len())?;
        Ok(network::forward_batch(&self.spec, params, points))
    }

    /// Manufactured solution at one point.
    pub fn exact_field(&self, point: &[f64; 2]) -> [f64; 2] {
        match self.kind.dim() {
            1 => [elliptic::manufactured_1d(point[0]), 0.0],
            _ => neohookean::manufactured_2d(&point[..], self.alpha),
        }
    }

    /// max over `points` of the Euclidean distance between the network field
    /// and the manufactured solution.
    pub fn max_pointwise_error(&self, params: &[f64], points: &[[f64; 2]]) -> Result<f64> {
        if self.source != Source::Manufactured {
            return Err(Error::Config("pointwise error needs the manufactured source".into()));
        }
        let u = self.field(params, points)?;
        let mut worst: f64 = 0.0;
        for (p, x) in points.iter().enumerate() {
            let exact = self.exact_field(x);
            let err: f64 = (0..self.kind.dim()).map(|o| (u[o][p] - exact[o]).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(err);
        }
        Ok(worst)
    }
}

fn field_derivatives<S: Scalar>(comps: &[&[S]], layout: JetLayout) -> FieldDerivatives<S> {
    let zero = comps[0][0].constant_like(0.0);
    let mut field = FieldDerivatives { u: [zero; 2], du: [[zero; 2]; 2], d2u: [[[zero; 2]; 2]; 2] };
    for i in 0..2 {
        field.u[i] = comps[i][0];
        for j in 0..2 {
            field.du[i][j] = comps[i][layout.grad(j)];
            if layout.order >= 2 {
                for k in 0..2 {
                    field.d2u[i][j][k] = comps[i][layout.hess(j, k)];
                }
            }
        }
    }
    field
}

impl Differentiable for Objective {
    fn dim(&self) -> usize {
        self.param_count()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.evaluate(x)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.value_and_grad_on(&self.fixed, x)
    }

    fn hvp_batch(&self, x: &[f64], directions: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.hvp_on(&self.fixed, x, directions)?.2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, rel_err};
    use crate::network::init_params;
    use crate::rng;
    use rand::Rng;

    fn small(kind: ObjectiveKind) -> Objective {
        let spec = if kind.dim() == 1 { NetworkSpec::elliptic_1d(6) } else { NetworkSpec::neohookean_2d(5) };
        let grid = if kind.dim() == 1 { QuadratureGrid::midpoint_1d(30) } else { QuadratureGrid::polar_disk(5, 8) };
        Objective::with_grid(kind, spec, grid).unwrap()
    }

    const KINDS: [ObjectiveKind; 4] = [ObjectiveKind::Drm1d, ObjectiveKind::Pinn1d, ObjectiveKind::Drm2d, ObjectiveKind::Pinn2d];

    fn zero_outer(obj: &Objective, seed: u64) -> Vec<f64> {
        let mut p = init_params(&obj.spec, seed, 1.0);
        for v in &mut p[obj.spec.layout().outer()] {
            *v = 0.0;
        }
        p
    }

    #[test]
    fn zero_field_losses() {
        let drm = Objective::new(ObjectiveKind::Drm1d, NetworkSpec::elliptic_1d(20)).unwrap();
        assert_eq!(drm.evaluate(&zero_outer(&drm, 1)).unwrap(), 0.0);

        let pinn = Objective::new(ObjectiveKind::Pinn1d, NetworkSpec::elliptic_1d(20)).unwrap();
        let grid = pinn.grid();
        let expect = 0.5 * grid.points.iter().zip(&grid.weights).map(|(x, w)| w * elliptic::source_1d(x[0]).powi(2)).sum::<f64>();
        assert!((pinn.evaluate(&zero_outer(&pinn, 1)).unwrap() - expect).abs() < 1e-12 * expect);

        let drm2 = Objective::new(ObjectiveKind::Drm2d, NetworkSpec::neohookean_2d(5)).unwrap();
        assert_eq!(drm2.evaluate(&zero_outer(&drm2, 1)).unwrap(), 0.0);
    }

    #[test]
    fn pinn_gradient_wrt_inner_vanishes_at_zero_outer_layer() {
        let obj = small(ObjectiveKind::Pinn1d);
        let p = zero_outer(&obj, 2);
        let (_, g) = obj.value_and_grad(&p).unwrap();
        assert!(g[obj.spec.layout().inner()].iter().all(|&v| v == 0.0));
        assert!(g[obj.spec.layout().outer()].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in KINDS {
            let obj = small(kind);
            let mut r = rng::stream(7, kind.name());
            for trial in 0..3 {
                let p = init_params(&obj.spec, trial, 0.5);
                let v: Vec<f64> = (0..p.len()).map(|_| r.random_range(-1.0..1.0)).collect();
                let (_, g) = obj.value_and_grad(&p).unwrap();
                let h = 1e-5;
                let plus: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + h * b).collect();
                let minus: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a - h * b).collect();
                let fd = (obj.evaluate(&plus).unwrap() - obj.evaluate(&minus).unwrap()) / (2.0 * h);
                assert!(rel_err(dot(&g, &v), fd, 1e-8) < 1e-6, "{kind:?}: {} vs {fd}", dot(&g, &v));
            }
        }
    }

    #[test]
    fn hvp_matches_gradient_differences_and_dual_value_agrees() {
        for kind in KINDS {
            let obj = small(kind);
            let p = init_params(&obj.spec, 5, 0.5);
            let mut r = rng::stream(8, kind.name());
            let v: Vec<f64> = (0..p.len()).map(|_| r.random_range(-1.0..1.0)).collect();
            let (loss, grad, hv) = obj.hvp_on(obj.fixed_quadrature(), &p, &[v.clone()]).unwrap();
            let (loss_ref, grad_ref) = obj.value_and_grad(&p).unwrap();
            assert!((loss - loss_ref).abs() <= 1e-14 * loss_ref.abs().max(1.0));
            assert!(grad.iter().zip(&grad_ref).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0)));
            let h = 1e-5;
            let plus: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let (gp, gm) = (obj.gradient(&plus).unwrap(), obj.gradient(&minus).unwrap());
            let scale = hv[0].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            for i in 0..p.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!((hv[0][i] - fd).abs() < 1e-5 * scale.max(1e-8), "{kind:?} component {i}");
            }
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        for kind in KINDS {
            let obj = small(kind);
            let p = init_params(&obj.spec, 6, 1.0);
            let h = autodiff::hessian(&obj, &p).unwrap();
            assert_eq!(h.dim(), obj.param_count());
            assert!(h.relative_asymmetry() < 1e-10, "{kind:?} {}", h.relative_asymmetry());
        }
    }

    #[test]
    fn drm_1d_is_linear_in_outer_hessian_block_of_source_term() {
        // With f ≡ 0 the 1D energy is quadratic in the outer layer: the outer
        // block of the Hessian is the stiffness Gram matrix and Π(θ) = ½θᴼᵀKθᴼ.
        let obj = small(ObjectiveKind::Drm1d).with_problem(Material::default(), 1.0, Source::Zero);
        let p = init_params(&obj.spec, 3, 1.0);
        let h = autodiff::hessian(&obj, &p).unwrap();
        let outer = obj.spec.layout().outer();
        let po = &p[outer.clone()];
        let mut quad = 0.0;
        for (a, i) in outer.clone().enumerate() {
            for (b, j) in outer.clone().enumerate() {
                quad += 0.5 * po[a] * h.matrix[(i, j)] * po[b];
            }
        }
        assert!(rel_err(quad, obj.evaluate(&p).unwrap(), 1e-12) < 1e-10);
    }

    #[test]
    fn manufactured_field_errors_and_variance() {
        let obj = small(ObjectiveKind::Pinn1d);
        let p = zero_outer(&obj, 1);
        let pts = QuadratureGrid::uniform_1d_inclusive(201);
        let err = obj.max_pointwise_error(&p, &pts).unwrap();
        // max |2x sin 2πx| on [0, 1]
        assert!(err > 1.5 && err < 2.0);

        let zero_src = small(ObjectiveKind::Drm1d).with_problem(Material::default(), 1.0, Source::Zero);
        assert_eq!(zero_src.integrand_variance(&zero_outer(&zero_src, 1)).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_reports_point() {
        let obj = small(ObjectiveKind::Drm2d);
        let mut p = init_params(&obj.spec, 1, 1.0);
        for v in &mut p[obj.spec.layout().outer()] {
            *v *= 400.0;
        }
        match obj.evaluate(&p) {
            Err(Error::NonFinite { point: Some(_), coords: Some(c) }) => assert_eq!(c.len(), 2),
            other => panic!("expected non-finite, got {other:?}"),
        }
        assert!(obj.value_and_grad(&p).unwrap_err().is_non_finite());
        let clamped = obj.clone().with_clamp(Some(1e-6));
        assert!(clamped.evaluate(&p).unwrap().is_finite());
    }

    #[test]
    fn rejects_mismatched_spec() {
        assert!(Objective::new(ObjectiveKind::Drm2d, NetworkSpec::elliptic_1d(5)).is_err());
        let obj = small(ObjectiveKind::Drm1d);
        assert!(matches!(obj.evaluate(&[0.0; 3]), Err(Error::Dimension { .. })));
    }
}
