use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use centralizer::Region;
use geometry_flow::{lattice, DomainChart, Matrix, Singularity, SingularityKind, Vector, VectorField};
use serde::Serialize;

use crate::profile::SeamProfile;
use crate::CliError;

pub type ScalarField = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;

pub const GOLDEN: f64 = 0.618_033_988_749_894_8;

pub const NAMES: [&str; 8] = [
    "annulus_unit_speed",
    "rigid_rotation",
    "torus_linear",
    "shear_strip",
    "linear_saddle",
    "morse_gradient_torus",
    "t3_collinear_not_qt",
    "suspension_rotation",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tags {
    /// `Some(true)`: no sampled pair should stay close; `Some(false)`: a witness exists.
    pub separating: Option<bool>,
    pub commuting: bool,
    pub collinear: bool,
    pub singular_fibers: bool,
}

/// A named example flow with its companion field, first integral and declared grids.
#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub params: Vec<f64>,
    pub x: VectorField,
    pub y: Option<VectorField>,
    /// First integral of `X`; equals `Y/X` when a companion is present.
    pub invariant: Option<ScalarField>,
    /// The field `X` is built from by a scalar factor.
    pub base: Option<VectorField>,
    pub provenance: String,
    pub tags: Tags,
    pub base_point: Vector,
    pub grid: Vec<Vector>,
    pub certify_samples: Vec<Vector>,
    /// Sample points of the zero set of `X`.
    pub singular_set: Vec<Vector>,
    pub region: Region,
}

impl fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("x", &self.x)
            .field("y", &self.y)
            .field("tags", &self.tags)
            .finish()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EntrySummary {
    pub name: String,
    pub params: Vec<f64>,
    pub dim: usize,
    pub domain: DomainChart,
    pub companion: Option<String>,
    pub invariant: bool,
    pub tags: Tags,
    pub provenance: String,
}

impl CatalogEntry {
    pub fn domain(&self) -> &DomainChart {
        self.x.domain()
    }

    pub fn summary(&self) -> EntrySummary {
        EntrySummary {
            name: self.name.clone(),
            params: self.params.clone(),
            dim: self.x.dim(),
            domain: self.domain().clone(),
            companion: self.y.as_ref().map(|y| y.name().to_string()),
            invariant: self.invariant.is_some(),
            tags: self.tags.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn companion(&self) -> Result<&VectorField, CliError> {
        self.y.as_ref().ok_or_else(|| CliError::Usage(format!("{} has no companion field", self.name)))
    }
}

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

/// Splits `name(a, b)` into the name and its numeric parameters.
fn parse_name(spec: &str) -> Result<(String, Vec<f64>), CliError> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec.to_string(), Vec::new()));
    };
    let inner = spec[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| CliError::Usage(format!("unbalanced parameters in {spec:?}")))?;
    let params = inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad catalog parameter {s:?}"))))
        .collect::<Result<_, _>>()?;
    Ok((spec[..open].trim().to_string(), params))
}

/// Looks up a catalog entry; parametrized entries accept `name(p1, p2)`.
pub fn catalog_get(spec: &str) -> Result<CatalogEntry, CliError> {
    let (name, params) = parse_name(spec)?;
    let arity = |max: usize| -> Result<(), CliError> {
        if params.len() > max {
            Err(CliError::Usage(format!("{name} takes at most {max} parameters")))
        } else {
            Ok(())
        }
    };
    match name.as_str() {
        "annulus_unit_speed" => arity(0).map(|_| annulus_unit_speed()),
        "rigid_rotation" => arity(0).map(|_| rigid_rotation()),
        "torus_linear" => {
            arity(1)?;
            Ok(torus_linear(params.first().copied().unwrap_or(GOLDEN)))
        }
        "shear_strip" => arity(0).map(|_| shear_strip()),
        "linear_saddle" => arity(0).map(|_| linear_saddle()),
        "morse_gradient_torus" => arity(0).map(|_| morse_gradient_torus()),
        "t3_collinear_not_qt" => arity(0).map(|_| t3_collinear_not_qt()),
        "suspension_rotation" => {
            arity(2)?;
            Ok(suspension_rotation(params.first().copied().unwrap_or(GOLDEN), params.get(1).copied().unwrap_or(0.1)))
        }
        _ => Err(CliError::UnknownEntry(name)),
    }
}

fn annulus_grid(inner: f64, outer: f64, n: usize) -> Vec<Vector> {
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        let r = inner + (outer - inner) * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let th = TAU * j as f64 / n as f64;
            pts.push(v(&[r * th.cos(), r * th.sin()]));
        }
    }
    pts
}

fn annulus() -> DomainChart {
    DomainChart::annulus(1.0, 2.0, 0.5).expect("valid annulus")
}

fn unit_torus(d: usize, radius: f64) -> DomainChart {
    DomainChart::torus(vec![1.0; d], radius).expect("valid torus")
}

pub fn annulus_unit_speed() -> CatalogEntry {
    let x = VectorField::new("annulus_unit_speed", annulus(), |p| {
        let r = p.norm();
        v(&[-p[1] / r, p[0] / r])
    })
    .with_jacobian(|p| {
        let (x, y) = (p[0], p[1]);
        let r3 = p.norm().powi(3);
        Matrix::from_row_slice(2, 2, &[x * y / r3, -x * x / r3, y * y / r3, -x * y / r3])
    });
    let y = VectorField::new("r*annulus_unit_speed", annulus(), |p| v(&[-p[1], p[0]]))
        .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    CatalogEntry {
        name: "annulus_unit_speed".into(),
        params: Vec::new(),
        x,
        y: Some(y),
        invariant: Some(Arc::new(|p: &Vector| p.norm())),
        base: None,
        provenance: "X = ∂/∂θ read with unit linear speed (θ' = 1/r, period 2πr) on the \
                     annulus 1 ≤ r ≤ 2; companion Y = f(r)X with f(r) = r"
            .into(),
        tags: Tags { separating: Some(true), commuting: true, collinear: true, singular_fibers: false },
        base_point: v(&[1.5, 0.0]),
        grid: annulus_grid(1.0, 2.0, 10),
        certify_samples: annulus_grid(1.0, 2.0, 4),
        singular_set: Vec::new(),
        region: Region::Annulus { inner: 1.05, outer: 1.95 },
    }
}

pub fn rigid_rotation() -> CatalogEntry {
    let x = VectorField::new("rigid_rotation", annulus(), |p| v(&[-p[1], p[0]]))
        .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    let y = VectorField::new("(1+r^2)*rigid_rotation", annulus(), |p| {
        let f = 1.0 + p.norm_squared();
        v(&[-f * p[1], f * p[0]])
    })
    .with_jacobian(|p| {
        let (x, y) = (p[0], p[1]);
        let f = 1.0 + x * x + y * y;
        Matrix::from_row_slice(2, 2, &[-2.0 * x * y, -f - 2.0 * y * y, f + 2.0 * x * x, 2.0 * x * y])
    });
    CatalogEntry {
        name: "rigid_rotation".into(),
        params: Vec::new(),
        x,
        y: Some(y),
        invariant: Some(Arc::new(|p: &Vector| 1.0 + p.norm_squared())),
        base: None,
        provenance: "X = ∂/∂θ read as rigid rotation (θ' = 1, every period 2π) on the \
                     annulus 1 ≤ r ≤ 2; concentric orbits stay at constant distance; companion (1 + r²)X"
            .into(),
        tags: Tags { separating: Some(false), commuting: true, collinear: true, singular_fibers: false },
        base_point: v(&[1.5, 0.0]),
        grid: annulus_grid(1.0, 2.0, 10),
        certify_samples: annulus_grid(1.0, 2.0, 4),
        singular_set: Vec::new(),
        region: Region::Annulus { inner: 1.05, outer: 1.95 },
    }
}

pub fn torus_linear(theta: f64) -> CatalogEntry {
    let x = VectorField::new("torus_linear", unit_torus(2, 0.4), move |_| v(&[1.0, theta]))
        .with_jacobian(|_| Matrix::zeros(2, 2));
    let y = VectorField::new("2.5*torus_linear", unit_torus(2, 0.4), move |_| v(&[2.5, 2.5 * theta]))
        .with_jacobian(|_| Matrix::zeros(2, 2));
    CatalogEntry {
        name: "torus_linear".into(),
        params: vec![theta],
        x,
        y: Some(y),
        invariant: Some(Arc::new(|_: &Vector| 2.5)),
        base: None,
        provenance: format!("constant field (1, θ) on the unit 2-torus, θ = {theta}; companion 2.5X"),
        tags: Tags { separating: Some(false), commuting: true, collinear: true, singular_fibers: false },
        base_point: v(&[0.1, 0.2]),
        grid: unit_torus(2, 0.4).sample_grid(10),
        certify_samples: unit_torus(2, 0.4).sample_grid(4),
        singular_set: Vec::new(),
        region: Region::Domain,
    }
}

pub fn shear_strip() -> CatalogEntry {
    let dom = DomainChart::boxed(vec![-100.0, -1e6], vec![100.0, 1e6], 1.0).expect("valid box");
    let x = VectorField::new("shear_strip", dom, |p| v(&[1.0, p[1]]))
        .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
    let samples = [-1.0, -0.5, -0.05, 0.0, 0.05, 0.5, 1.0].iter().map(|y| v(&[0.0, *y])).collect();
    CatalogEntry {
        name: "shear_strip".into(),
        params: Vec::new(),
        x,
        y: None,
        invariant: None,
        base: None,
        provenance: "X = (1, y) on [−100, 100] × [−10⁶, 10⁶]: non-conformal normal expansion e^t with \
                     log|det P_{x,n}| = n + log(|X(x)|/|X(X_n x)|)"
            .into(),
        tags: Tags { separating: None, commuting: false, collinear: false, singular_fibers: false },
        base_point: v(&[0.0, 0.0]),
        grid: lattice(&[(0..10).map(|i| i as f64 - 5.0).collect(), (0..10).map(|i| (i as f64 - 4.5) / 5.0).collect()]),
        certify_samples: samples,
        singular_set: Vec::new(),
        region: Region::Box { lower: vec![-1.0, -1.0], upper: vec![1.0, 1.0] },
    }
}

pub fn linear_saddle() -> CatalogEntry {
    let dom = DomainChart::boxed(vec![-1.0, -1.0], vec![1.0, 1.0], 0.5).expect("valid box");
    let x = VectorField::new("linear_saddle", dom.clone(), |p| v(&[p[0], -p[1]]))
        .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]))
        .with_singularities(vec![Singularity::new(vec![0.0, 0.0], SingularityKind::Saddle)]);
    CatalogEntry {
        name: "linear_saddle".into(),
        params: Vec::new(),
        x,
        y: None,
        invariant: Some(Arc::new(|p: &Vector| p[0] * p[1])),
        base: None,
        provenance: "linear saddle X = (x, −y) on [−1, 1]² with first integral f = xy; sup of |∇f| over the \
                     sphere of radius r equals r"
            .into(),
        tags: Tags { separating: None, commuting: false, collinear: false, singular_fibers: false },
        base_point: v(&[0.1, 0.5]),
        grid: dom.sample_grid(10),
        certify_samples: lattice(&[vec![0.2, 0.6, 0.9], vec![0.2, 0.6, 0.9]]),
        singular_set: vec![Vector::zeros(2)],
        region: Region::Box { lower: vec![-0.9, -0.9], upper: vec![0.9, 0.9] },
    }
}

pub fn morse_gradient_torus() -> CatalogEntry {
    let x = VectorField::new("morse_gradient_torus", unit_torus(2, 0.4), |p| {
        v(&[-TAU * (TAU * p[0]).sin(), -TAU * (TAU * p[1]).sin()])
    })
    .with_jacobian(|p| {
        let k = TAU * TAU;
        Matrix::from_row_slice(2, 2, &[-k * (TAU * p[0]).cos(), 0.0, 0.0, -k * (TAU * p[1]).cos()])
    })
    .with_singularities(vec![
        Singularity::new(vec![0.0, 0.0], SingularityKind::Sink),
        Singularity::new(vec![0.5, 0.5], SingularityKind::Source),
        Singularity::new(vec![0.0, 0.5], SingularityKind::Saddle),
        Singularity::new(vec![0.5, 0.0], SingularityKind::Saddle),
    ]);
    CatalogEntry {
        name: "morse_gradient_torus".into(),
        params: Vec::new(),
        x,
        y: None,
        invariant: None,
        base: None,
        provenance: "X = ∇f with f(x, y) = cos 2πx + cos 2πy on the unit 2-torus; sink (0, 0), \
                     source (1/2, 1/2), saddles (0, 1/2) and (1/2, 0)"
            .into(),
        tags: Tags { separating: Some(false), commuting: false, collinear: false, singular_fibers: false },
        base_point: v(&[0.2, 0.3]),
        grid: unit_torus(2, 0.4).sample_grid(10),
        certify_samples: lattice(&[vec![0.1, 0.2, 0.3, 0.4], vec![0.1, 0.2, 0.3, 0.4]]),
        singular_set: lattice(&[vec![0.0, 0.5], vec![0.0, 0.5]]),
        region: Region::Domain,
    }
}

/// `ψ(x) = (cos²πx₁ + cos²πx₂)/2`, vanishing only at `(1/2, 1/2)`, and its gradient.
fn psi(x1: f64, x2: f64) -> (f64, f64, f64) {
    let (c1, c2) = ((PI * x1).cos(), (PI * x2).cos());
    (0.5 * (c1 * c1 + c2 * c2), -0.5 * PI * (TAU * x1).sin(), -0.5 * PI * (TAU * x2).sin())
}

/// `s ↦ scale(s)·ψ(x)·(0, 1, θ)` on the unit 3-torus with coordinates `(s, x₁, x₂)`.
fn fibered(name: &str, theta: f64, scale: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>) -> VectorField {
    let dom = unit_torus(3, 0.2);
    let s_eval = scale.clone();
    VectorField::new(name, dom, move |p| {
        let (a, _) = s_eval(p[0]);
        let (w, _, _) = psi(p[1], p[2]);
        v(&[0.0, a * w, a * w * theta])
    })
    .with_jacobian(move |p| {
        let (a, da) = scale(p[0]);
        let (w, w1, w2) = psi(p[1], p[2]);
        Matrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, 0.0, da * w, a * w1, a * w2, theta * da * w, theta * a * w1, theta * a * w2],
        )
    })
}

pub fn t3_collinear_not_qt() -> CatalogEntry {
    let theta = GOLDEN;
    let prof = Arc::new(SeamProfile::example());
    let (p1, p2, p3) = (prof.clone(), prof.clone(), prof.clone());
    let x = fibered("t3_collinear_not_qt", theta, Arc::new(move |s| p1.inv_g(s)));
    let y = fibered("(f/g)*Z", theta, Arc::new(move |s| p2.ratio(s)));
    let z = fibered("Z", theta, Arc::new(|_| (1.0, 0.0)));
    let s_values: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();
    let mut grid = Vec::with_capacity(100);
    for s in &s_values {
        for k in 0..10 {
            let x1 = (k as f64 + 0.5) / 10.0;
            grid.push(v(&[*s, x1, (0.37 + GOLDEN * k as f64).fract()]));
        }
    }
    CatalogEntry {
        name: "t3_collinear_not_qt".into(),
        params: vec![theta],
        x,
        y: Some(y),
        invariant: Some(Arc::new(move |p: &Vector| p3.f(p[0]))),
        base: Some(z),
        provenance: format!(
            "Z = ψV on T² with ψ = (cos²πx₁ + cos²πx₂)/2 vanishing only at (1/2, 1/2), \
             V = (1, θ) with θ = (√5 − 1)/2; X = Z/g(s), Y = (f/g)(s)Z = f(s)X; f = (1 − 2s)⁻², \
             g = (1 − 4s²)⁻² on |s − 1/2| < 1/4, extended on the complementary arc by {}",
            prof.describe()
        ),
        tags: Tags { separating: Some(false), commuting: true, collinear: true, singular_fibers: true },
        base_point: v(&[0.25, 0.2, 0.3]),
        grid,
        certify_samples: lattice(&[vec![0.2, 0.3], vec![0.1, 0.3], vec![0.2, 0.7]]),
        singular_set: (0..10).map(|k| v(&[0.5, (k as f64 + 0.25) / 10.0, (0.2 + GOLDEN * k as f64).fract()])).collect(),
        region: Region::Box { lower: vec![0.0, 0.0, 0.0], upper: vec![1.0, 1.0, 1.0] },
    }
}

/// `τ(u) = 1 + a·cos 2πu`.
pub fn roof(amp: f64) -> impl Fn(f64) -> f64 + Send + Sync + Copy {
    move |u| 1.0 + amp * (TAU * u).cos()
}

pub fn suspension_rotation(theta: f64, amp: f64) -> CatalogEntry {
    let tau = roof(amp);
    // speed factor 1/h with h = 1 + 2sin²(πy)(τ(x − θ{y}) − 1): returns to y = 0 after τ(x)
    let x = VectorField::new("suspension_rotation", unit_torus(2, 0.4), move |p| {
        let y = p[1] - p[1].floor();
        let b = 2.0 * (PI * y).sin().powi(2);
        let h = 1.0 + b * (tau(p[0] - theta * y) - 1.0);
        v(&[theta / h, 1.0 / h])
    });
    CatalogEntry {
        name: "suspension_rotation".into(),
        params: vec![theta, amp],
        x,
        y: None,
        invariant: None,
        base: None,
        provenance: format!(
            "suspension of the rotation x ↦ x + θ (θ = {theta}) under the roof τ(x) = 1 + {amp}·cos 2πx, realized \
             on T² as a time change of (θ, 1) whose return time to y = 0 is τ(x)"
        ),
        tags: Tags { separating: None, commuting: false, collinear: false, singular_fibers: false },
        base_point: v(&[0.1, 0.0]),
        grid: unit_torus(2, 0.4).sample_grid(10),
        certify_samples: unit_torus(2, 0.4).sample_grid(4),
        singular_set: Vec::new(),
        region: Region::Domain,
    }
}
