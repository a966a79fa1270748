//! State-space models, validation and zero-order-hold discretization.
//!
//! The discrete model is
//!
//! ```text
//! x_{t+1} = A x_t + B u_t + G v_t
//!     y_t = C x_t + D v_t,        v_t ~ N(0, I_m)
//! ```
//!
//! with state dimension `n`, input `q`, output `p` and noise `m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

const INDEPENDENCE_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub q: usize,
    pub p: usize,
    pub m: usize,
}

fn check_shapes(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix, g: &Matrix) -> Result<Dims> {
    let n = a.nrows();
    let dims = Dims {
        n,
        q: b.ncols(),
        p: c.nrows(),
        m: g.ncols(),
    };
    let mut bad = Vec::new();
    if n == 0 || !a.is_square() {
        bad.push(format!("A is {}x{}, expected square n>0", a.nrows(), a.ncols()));
    }
    if b.nrows() != n || dims.q == 0 {
        bad.push(format!("B is {}x{}, expected {n}xq", b.nrows(), b.ncols()));
    }
    if c.ncols() != n || dims.p == 0 {
        bad.push(format!("C is {}x{}, expected px{n}", c.nrows(), c.ncols()));
    }
    if g.nrows() != n || dims.m == 0 {
        bad.push(format!("G is {}x{}, expected {n}xm", g.nrows(), g.ncols()));
    }
    if d.nrows() != dims.p || d.ncols() != dims.m {
        bad.push(format!(
            "D is {}x{}, expected {}x{}",
            d.nrows(),
            d.ncols(),
            dims.p,
            dims.m
        ));
    }
    if bad.is_empty() {
        Ok(dims)
    } else {
        Err(Error::Dimension(bad.join("; ")))
    }
}

/// Discrete-time linear model with Gaussian noise structure.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub g: Matrix,
}

impl LinearModel {
    /// Builds a model after checking dimensional consistency only; the noise
    /// assumptions are reported by [`LinearModel::validate`].
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix, g: Matrix) -> Result<Self> {
        check_shapes(&a, &b, &c, &d, &g)?;
        Ok(Self { a, b, c, d, g })
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.a.nrows(),
            q: self.b.ncols(),
            p: self.c.nrows(),
            m: self.g.ncols(),
        }
    }

    /// Lists every violated assumption. Empty means the model is admissible
    /// for all filters in this crate.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(Error::Dimension(msg)) = check_shapes(&self.a, &self.b, &self.c, &self.d, &self.g)
        {
            out.push(msg);
            return out;
        }
        for (name, m) in [
            ("A", &self.a),
            ("B", &self.b),
            ("C", &self.c),
            ("D", &self.d),
            ("G", &self.g),
        ] {
            if !linalg::is_finite(m) {
                out.push(format!("{name} has non-finite entries"));
            }
        }
        if !out.is_empty() {
            return out;
        }
        let gd = &self.g * self.d.transpose();
        if gd.amax() > INDEPENDENCE_TOL {
            out.push(format!("G·Dᵀ ≠ 0 (max |entry| = {:e})", gd.amax()));
        }
        let ddt = self.innovation_noise();
        if linalg::cholesky(&ddt, "D·Dᵀ").is_err() {
            out.push("D·Dᵀ singular".to_string());
        }
        out
    }

    /// Fails with [`Error::InvalidModel`] unless `validate` is empty.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    /// `G Gᵀ`
    pub fn process_noise(&self) -> Matrix {
        &self.g * self.g.transpose()
    }

    /// `D Dᵀ`
    pub fn innovation_noise(&self) -> Matrix {
        &self.d * self.d.transpose()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        doc.try_into()
    }
}

/// JSON layout: keys `A,B,C,D,G` as row-major nested arrays plus `dims`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub dims: Dims,
}

impl From<&LinearModel> for ModelDocument {
    fn from(m: &LinearModel) -> Self {
        Self {
            a: linalg::to_rows(&m.a),
            b: linalg::to_rows(&m.b),
            c: linalg::to_rows(&m.c),
            d: linalg::to_rows(&m.d),
            g: linalg::to_rows(&m.g),
            dims: m.dims(),
        }
    }
}

impl TryFrom<ModelDocument> for LinearModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        let Dims { n, q, p, m } = doc.dims;
        LinearModel::new(
            linalg::from_rows(&doc.a, n, n, "A")?,
            linalg::from_rows(&doc.b, n, q, "B")?,
            linalg::from_rows(&doc.c, p, n, "C")?,
            linalg::from_rows(&doc.d, p, m, "D")?,
            linalg::from_rows(&doc.g, n, m, "G")?,
        )
    }
}

/// Continuous-time counterpart, `ẋ = A x + B u + G ẇ`, `y = C x + D ẇ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub g: Matrix,
}

impl ContinuousModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix, g: Matrix) -> Result<Self> {
        check_shapes(&a, &b, &c, &d, &g)?;
        Ok(Self { a, b, c, d, g })
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.a.nrows(),
            q: self.b.ncols(),
            p: self.c.nrows(),
            m: self.g.ncols(),
        }
    }
}

/// Zero-order-hold discretization with sampling time `t`.
///
/// `A` and `B` come from the exponential of the augmented block matrix
/// `[[Ā, B̄], [0, 0]] · t`. The noise gains are `G = √t · Ḡ` and `D = D̄`.
pub fn zoh_discretize(cm: &ContinuousModel, t: f64) -> Result<LinearModel> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sampling time must be positive, got {t}"
        )));
    }
    let Dims { n, q, .. } = cm.dims();
    let mut aug = Matrix::zeros(n + q, n + q);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&cm.a * t));
    aug.view_mut((0, n), (n, q)).copy_from(&(&cm.b * t));
    let e = linalg::expm(&aug)?;
    let a = e.view((0, 0), (n, n)).into_owned();
    let b = e.view((0, n), (n, q)).into_owned();
    LinearModel::new(a, b, cm.c.clone(), cm.d.clone(), &cm.g * t.sqrt())
}

/// Gaussian density `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: Matrix,
}

impl GaussianBelief {
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension(format!(
                "covariance {}x{} for mean of length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        if (&cov - cov.transpose()).amax() > SYMMETRY_TOL {
            return Err(Error::InvalidParameter("covariance not symmetric".into()));
        }
        if linalg::min_eigenvalue(&cov) < -SYMMETRY_TOL {
            return Err(Error::NotPositiveDefinite("covariance"));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}
