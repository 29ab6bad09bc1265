//! Neumann-Laplacian cosine eigenbasis on an interval.
//!
//! Everything downstream works with coefficient vectors against the
//! orthonormal basis `e_0 = 1/sqrt(L)`, `e_k = sqrt(2/L) cos(k pi x / L)`,
//! which diagonalizes the Laplacian with homogeneous Neumann conditions:
//! `-lap e_k = lambda_k e_k`, `lambda_k = (k pi / L)^2`. Inner products of
//! fields reduce to coefficient dot products, and every represented function
//! satisfies the no-flux boundary condition by construction.
//!
//! Physical-space evaluation uses a uniform midpoint grid. The midpoint rule
//! is exact for products of basis cosines up to the anti-aliasing margin
//! enforced by `quad_points >= 2 * n_modes`.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("domain length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("need at least one mode, got {0}")]
    BadModeCount(usize),
    #[error("quad_points = {quad_points} too small for {n_modes} modes (need >= {})", 2 * n_modes)]
    InsufficientQuadrature { quad_points: usize, n_modes: usize },
    #[error("sample length {got} does not match quad_points {expected}")]
    SampleLength { expected: usize, got: usize },
}

/// Spatial interval `(0, L)` with its collocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub length: f64,
    pub quad_points: usize,
}

impl Domain {
    pub fn new(length: f64, quad_points: usize) -> Result<Self, SpectralError> {
        if !length.is_finite() || length <= 0.0 {
            return Err(SpectralError::BadLength(length));
        }
        Ok(Domain { length, quad_points })
    }

    /// Midpoint nodes `x_j = (j + 1/2) L / m`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.length / self.quad_points as f64;
        (0..self.quad_points).map(|j| (j as f64 + 0.5) * h).collect()
    }

    /// Quadrature weight of every node (uniform grid).
    pub fn weight(&self) -> f64 {
        self.length / self.quad_points as f64
    }
}

/// First `n_modes` Neumann eigenpairs plus the sampled basis table.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub domain: Domain,
    pub n_modes: usize,
    pub eigenvalues: Vec<f64>,
    /// `table[k * quad_points + j] = e_k(x_j)`.
    table: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(domain: Domain, n_modes: usize) -> Result<Self, SpectralError> {
        if n_modes == 0 {
            return Err(SpectralError::BadModeCount(n_modes));
        }
        if domain.quad_points < 2 * n_modes {
            return Err(SpectralError::InsufficientQuadrature {
                quad_points: domain.quad_points,
                n_modes,
            });
        }
        let l = domain.length;
        let eigenvalues: Vec<f64> = (0..n_modes)
            .map(|k| {
                let w = k as f64 * PI / l;
                w * w
            })
            .collect();
        let nodes = domain.nodes();
        let m = domain.quad_points;
        let mut table = vec![0.0; n_modes * m];
        let c0 = 1.0 / l.sqrt();
        let ck = (2.0 / l).sqrt();
        for (k, row) in table.chunks_mut(m).enumerate() {
            if k == 0 {
                row.fill(c0);
            } else {
                let freq = k as f64 * PI / l;
                for (j, v) in row.iter_mut().enumerate() {
                    *v = ck * (freq * nodes[j]).cos();
                }
            }
        }
        Ok(SpectralBasis { domain, n_modes, eigenvalues, table })
    }

    /// Quadrature approximation of the basis coefficients of sampled data.
    /// Exact (to rounding) for inputs band-limited to the resolved modes.
    pub fn project(&self, samples: &[f64]) -> Result<Field, SpectralError> {
        let m = self.domain.quad_points;
        if samples.len() != m {
            return Err(SpectralError::SampleLength { expected: m, got: samples.len() });
        }
        let h = self.domain.weight();
        let coeffs = self
            .table
            .chunks(m)
            .map(|row| h * row.iter().zip(samples).map(|(e, v)| e * v).sum::<f64>())
            .collect();
        Ok(Field { coeffs })
    }

    /// Pointwise synthesis at the collocation nodes.
    pub fn evaluate(&self, field: &Field) -> Vec<f64> {
        self.check_len(field);
        let m = self.domain.quad_points;
        let mut out = vec![0.0; m];
        for (k, row) in self.table.chunks(m).enumerate() {
            let c = field.coeffs[k];
            if c != 0.0 {
                for (o, e) in out.iter_mut().zip(row) {
                    *o += c * e;
                }
            }
        }
        out
    }

    /// Projection of a closed-form function given on `(0, L)`.
    pub fn project_fn(&self, f: impl Fn(f64) -> f64) -> Field {
        let samples: Vec<f64> = self.domain.nodes().into_iter().map(f).collect();
        self.project(&samples).expect("sample count matches by construction")
    }

    /// Field for `amplitude * cos(k pi x / L)` (the `k = 0` case is the
    /// constant `amplitude`).
    pub fn cosine_field(&self, k: usize, amplitude: f64) -> Field {
        assert!(k < self.n_modes, "cosine mode {k} outside the resolved band");
        let l = self.domain.length;
        let mut f = Field::zeros(self.n_modes);
        f.coeffs[k] = if k == 0 { amplitude * l.sqrt() } else { amplitude * (l / 2.0).sqrt() };
        f
    }

    /// `-lap` acts diagonally: coefficient `k` is scaled by `-lambda_k`.
    pub fn laplacian(&self, field: &Field) -> Field {
        self.check_len(field);
        Field {
            coeffs: field
                .coeffs
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, lam)| -lam * c)
                .collect(),
        }
    }

    /// `||grad f||_H`, via the eigen-expansion `sum lambda_k c_k^2`.
    pub fn grad_norm(&self, field: &Field) -> f64 {
        self.check_len(field);
        field
            .coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, lam)| lam * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Midpoint-rule `L^2` norm of sampled data.
    pub fn quadrature_norm(&self, samples: &[f64]) -> f64 {
        let h = self.domain.weight();
        (h * samples.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Midpoint-rule integral of sampled data over the domain.
    pub fn quadrature_integral(&self, samples: &[f64]) -> f64 {
        self.domain.weight() * samples.iter().sum::<f64>()
    }

    fn check_len(&self, field: &Field) {
        assert_eq!(
            field.coeffs.len(),
            self.n_modes,
            "field has {} coefficients, basis resolves {} modes",
            field.coeffs.len(),
            self.n_modes
        );
    }
}

/// Coefficient vector of a function in the cosine eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field { coeffs: vec![0.0; n] }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        Field { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `H` inner product; a coefficient dot product by orthonormality.
    pub fn inner(&self, other: &Field) -> f64 {
        assert_eq!(self.len(), other.len(), "inner product of mismatched bases");
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    /// `||f||_H = sqrt(sum c_k^2)`.
    pub fn h_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scale(&self, a: f64) -> Field {
        Field { coeffs: self.coeffs.iter().map(|c| a * c).collect() }
    }

    pub fn add(&self, other: &Field) -> Field {
        assert_eq!(self.len(), other.len(), "adding fields of mismatched bases");
        Field { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Field) -> Field {
        assert_eq!(self.len(), other.len(), "subtracting fields of mismatched bases");
        Field { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        assert_eq!(self.len(), other.len(), "axpy on fields of mismatched bases");
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
    }

    /// Pad with zeros or truncate to `n` coefficients.
    pub fn resized(&self, n: usize) -> Field {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n, 0.0);
        Field { coeffs }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis(l: f64, n: usize, m: usize) -> SpectralBasis {
        SpectralBasis::new(Domain::new(l, m).unwrap(), n).unwrap()
    }

    #[test]
    fn eigenvalues_match_closed_form() {
        let b = basis(1.0, 1, 8);
        assert_eq!(b.eigenvalues, vec![0.0]);

        let b = basis(1.0, 3, 16);
        // lambda_2 = (2 pi)^2
        assert!((b.eigenvalues[2] - 39.47841760435743).abs() < 1e-12);

        let b = basis(2.0, 2, 16);
        // lambda_1 = (pi / 2)^2
        assert!((b.eigenvalues[1] - 2.4674011002723395).abs() < 1e-12);
        for k in 1..b.n_modes {
            assert!(b.eigenvalues[k] > b.eigenvalues[k - 1]);
        }
    }

    #[test]
    fn make_basis_rejects_bad_inputs() {
        let d = Domain::new(1.0, 16).unwrap();
        assert!(matches!(SpectralBasis::new(d, 0), Err(SpectralError::BadModeCount(0))));
        let tight = Domain::new(1.0, 7).unwrap();
        assert!(matches!(
            SpectralBasis::new(tight, 4),
            Err(SpectralError::InsufficientQuadrature { quad_points: 7, n_modes: 4 })
        ));
        assert!(Domain::new(0.0, 8).is_err());
        assert!(Domain::new(-1.0, 8).is_err());
    }

    #[test]
    fn project_cosine_recovers_single_coefficient() {
        let b = basis(1.0, 4, 32);
        let f = b.project_fn(|x| (PI * x).cos());
        // integral of sqrt(2) cos^2(pi x) on (0,1) is 1/sqrt(2)
        assert!((f.coeffs[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        for k in [0usize, 2, 3] {
            assert!(f.coeffs[k].abs() < 1e-12);
        }
    }

    #[test]
    fn project_zero_gives_zero() {
        let b = basis(1.0, 4, 16);
        let f = b.project(&[0.0; 16]).unwrap();
        assert!(f.coeffs.iter().all(|c| *c == 0.0));
        assert!(b.evaluate(&Field::zeros(4)).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn project_rejects_length_mismatch() {
        let b = basis(1.0, 4, 16);
        assert!(matches!(
            b.project(&[0.0; 5]),
            Err(SpectralError::SampleLength { expected: 16, got: 5 })
        ));
    }

    #[test]
    fn constant_mode_evaluates_to_one() {
        let b = basis(2.0, 3, 16);
        let f = Field::from_coeffs(vec![2.0_f64.sqrt(), 0.0, 0.0]);
        for v in b.evaluate(&f) {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn laplacian_examples() {
        let b = basis(1.0, 3, 16);
        let constant = Field::from_coeffs(vec![1.0, 0.0, 0.0]);
        assert_eq!(b.laplacian(&constant).coeffs, vec![0.0, 0.0, 0.0]);

        let f = Field::from_coeffs(vec![0.0, 1.0, 0.0]);
        let lap = b.laplacian(&f);
        assert!((lap.coeffs[1] + PI * PI).abs() < 1e-12);
    }

    #[test]
    fn norms_of_cosine() {
        let b = basis(1.0, 4, 32);
        let f = b.project_fn(|x| (PI * x).cos());
        assert!((f.h_norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        // ||grad cos(pi x)||^2 = pi^2 / 2
        assert!((b.grad_norm(&f) - 2.221441469079183).abs() < 1e-10);
        let e1 = b.cosine_field(1, (2.0f64).sqrt());
        assert!((e1.inner(&e1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grad_norm_matches_quadrature_of_derivative() {
        let b = basis(1.5, 6, 64);
        let f = b.project_fn(|x| (PI * x / 1.5).cos() + 0.3 * (2.0 * PI * x / 1.5).cos());
        let deriv: Vec<f64> = b
            .domain
            .nodes()
            .into_iter()
            .map(|x| {
                -(PI / 1.5) * (PI * x / 1.5).sin() - 0.3 * (2.0 * PI / 1.5) * (2.0 * PI * x / 1.5).sin()
            })
            .collect();
        let quad = b.quadrature_norm(&deriv);
        let modal = b.grad_norm(&f);
        assert!((modal - quad).abs() / quad < 1e-8, "modal {modal} quad {quad}");
    }

    proptest! {
        #[test]
        fn projection_is_contractive(samples in proptest::collection::vec(-10.0f64..10.0, 64)) {
            let b = basis(1.0, 8, 64);
            let f = b.project(&samples).unwrap();
            let sample_norm = b.quadrature_norm(&samples);
            prop_assert!(f.h_norm() <= sample_norm + 1e-10);
        }

        #[test]
        fn project_evaluate_roundtrip(coeffs in proptest::collection::vec(-5.0f64..5.0, 8)) {
            let b = basis(1.0, 8, 64);
            let f = Field::from_coeffs(coeffs);
            let back = b.project(&b.evaluate(&f)).unwrap();
            for (a, c) in back.coeffs.iter().zip(&f.coeffs) {
                prop_assert!((a - c).abs() < 1e-12);
            }
        }

        #[test]
        fn band_limited_projection_is_exact(coeffs in proptest::collection::vec(-5.0f64..5.0, 4)) {
            // field in the span of the first 4 of 8 resolved modes
            let b = basis(1.0, 8, 64);
            let mut padded = coeffs.clone();
            padded.resize(8, 0.0);
            let f = Field::from_coeffs(padded);
            let back = b.project(&b.evaluate(&f)).unwrap();
            for (a, c) in back.coeffs.iter().zip(&f.coeffs) {
                prop_assert!((a - c).abs() < 1e-12);
            }
        }

        #[test]
        fn laplacian_is_linear(
            ca in proptest::collection::vec(-3.0f64..3.0, 6),
            cb in proptest::collection::vec(-3.0f64..3.0, 6),
            a in -4.0f64..4.0,
            s in -4.0f64..4.0,
        ) {
            let b = basis(1.0, 6, 32);
            let fa = Field::from_coeffs(ca);
            let fb = Field::from_coeffs(cb);
            let lhs = b.laplacian(&fa.scale(a).add(&fb.scale(s)));
            let rhs = b.laplacian(&fa).scale(a).add(&b.laplacian(&fb).scale(s));
            for (x, y) in lhs.coeffs.iter().zip(&rhs.coeffs) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
