//! Matrix-algebra model with a cyclic separating vector, brute-force Tomita
//! data, and the transpose/dagger calculus on operator matrices.
//!
//! The Hilbert space is `C^a ⊗ C^a` with index `i*a + k`. The algebra acts on
//! the first factor, its commutant on the second, and `xi = sum_i l_i e_i ⊗ e_i`.

use thiserror::Error;

use crate::linalg::{c, conj_mat, hermitian_fn, CMat, CVec};
use crate::phase_space::{polar_conjlinear, ConjLinearMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixCalcError {
    #[error("weight {index} is {value}; the vector is not separating")]
    NotSeparating { index: usize, value: f64 },
    #[error("weights must have unit square sum (got {0})")]
    NotNormalized(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("linear system is singular")]
    Singular,
}

pub type Result<T> = std::result::Result<T, MatrixCalcError>;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixModel {
    pub a: usize,
    pub lambda: Vec<f64>,
}

impl MatrixModel {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        for (index, &value) in lambda.iter().enumerate() {
            if value <= 0.0 {
                return Err(MatrixCalcError::NotSeparating { index, value });
            }
        }
        let total: f64 = lambda.iter().map(|l| l * l).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MatrixCalcError::NotNormalized(total));
        }
        Ok(Self { a: lambda.len(), lambda })
    }

    /// Tracial weights `1/sqrt(a)`.
    pub fn tracial(a: usize) -> Self {
        Self { a, lambda: vec![1.0 / (a as f64).sqrt(); a] }
    }

    pub fn dim(&self) -> usize {
        self.a * self.a
    }

    pub fn xi(&self) -> CVec {
        let a = self.a;
        CVec::from_fn(self.dim(), |r, _| if r / a == r % a { c(self.lambda[r / a], 0.0) } else { c(0.0, 0.0) })
    }

    /// `X ⊗ I`.
    pub fn embed(&self, x: &CMat) -> CMat {
        x.kronecker(&CMat::identity(self.a, self.a))
    }

    /// `I ⊗ Y`, an element of the commutant.
    pub fn embed_commutant(&self, y: &CMat) -> CMat {
        CMat::identity(self.a, self.a).kronecker(y)
    }

    pub fn matrix_unit(&self, p: usize, q: usize) -> CMat {
        let mut e = CMat::zeros(self.a, self.a);
        e[(p, q)] = c(1.0, 0.0);
        e
    }

    /// `X -> (X ⊗ I) xi`.
    pub fn vector_from_op(&self, x: &CMat) -> CVec {
        self.embed(x) * self.xi()
    }

    /// Inverse of `vector_from_op`: `X_{ji} = h_{j*a+i} / l_i`.
    pub fn op_from_vector(&self, h: &CVec) -> Result<CMat> {
        if h.len() != self.dim() {
            return Err(MatrixCalcError::Shape(format!("vector of length {}, expected {}", h.len(), self.dim())));
        }
        Ok(CMat::from_fn(self.a, self.a, |j, i| h[j * self.a + i] / self.lambda[i]))
    }
}

#[derive(Debug, Clone)]
pub struct ModularData {
    pub s: ConjLinearMap,
    pub j: ConjLinearMap,
    pub delta: CMat,
    pub delta_half: CMat,
}

/// Solves `S (x xi) = x* xi` over matrix units, then takes the polar decomposition.
pub fn brute_force_modular(model: &MatrixModel) -> Result<ModularData> {
    let a = model.a;
    let mut v_cols = Vec::with_capacity(model.dim());
    let mut w_cols = Vec::with_capacity(model.dim());
    for p in 0..a {
        for q in 0..a {
            v_cols.push(model.vector_from_op(&model.matrix_unit(p, q)));
            w_cols.push(model.vector_from_op(&model.matrix_unit(q, p)));
        }
    }
    let v = CMat::from_columns(&v_cols);
    let w = CMat::from_columns(&w_cols);
    let inv = conj_mat(&v).try_inverse().ok_or(MatrixCalcError::Singular)?;
    let s = ConjLinearMap::new(w * inv);
    let polar = polar_conjlinear(&s).map_err(|_| MatrixCalcError::Singular)?;
    let delta = &polar.delta_half * &polar.delta_half;
    Ok(ModularData { s, j: polar.j, delta, delta_half: polar.delta_half })
}

/// Map `k1 -> k2 ⊗ H` stored as a `(k2*h) x k1` matrix with row index `q*h + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub b: CMat,
    pub k1: usize,
    pub k2: usize,
    pub h: usize,
}

impl OperatorMatrix {
    pub fn new(b: CMat, k1: usize, k2: usize, h: usize) -> Result<Self> {
        if b.nrows() != k2 * h || b.ncols() != k1 {
            return Err(MatrixCalcError::Shape(format!(
                "{}x{} does not match ({}*{})x{}",
                b.nrows(),
                b.ncols(),
                k2,
                h,
                k1
            )));
        }
        Ok(Self { b, k1, k2, h })
    }

    /// `theta ⊗ |eta>` for `theta: k1 -> k2`.
    pub fn simple(theta: &CMat, eta: &CVec) -> Self {
        let (k2, k1) = theta.shape();
        let h = eta.len();
        let b = CMat::from_fn(k2 * h, k1, |row, p| theta[(row / h, p)] * eta[row % h]);
        Self { b, k1, k2, h }
    }

    pub fn zeros(k1: usize, k2: usize, h: usize) -> Self {
        Self { b: CMat::zeros(k2 * h, k1), k1, k2, h }
    }

    /// `(B_T)_{(p,r),q} = B_{(q,r),p}`.
    pub fn partial_transpose(&self) -> OperatorMatrix {
        let h = self.h;
        let b = CMat::from_fn(self.k1 * h, self.k2, |row, q| self.b[(q * h + row % h, row / h)]);
        OperatorMatrix { b, k1: self.k2, k2: self.k1, h }
    }

    /// `(k2 ⊗ S) B k1`, matrix `(I ⊗ A_S) conj(B)`.
    pub fn conjugate(&self, s: &ConjLinearMap) -> OperatorMatrix {
        let lift = CMat::identity(self.k2, self.k2).kronecker(&s.kernel);
        OperatorMatrix { b: lift * conj_mat(&self.b), k1: self.k1, k2: self.k2, h: self.h }
    }

    pub fn dagger(&self, s: &ConjLinearMap) -> OperatorMatrix {
        self.conjugate(s).partial_transpose()
    }

    /// `(T ⊗ I) B C`.
    pub fn module_product(&self, t: &CMat, cm: &CMat) -> OperatorMatrix {
        let lift = t.kronecker(&CMat::identity(self.h, self.h));
        OperatorMatrix { b: lift * &self.b * cm, k1: cm.ncols(), k2: t.nrows(), h: self.h }
    }

    pub fn hs_norm(&self) -> f64 {
        self.b.norm()
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        (&self.b - &other.b).iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }
}

/// Dagger from `<c1 ⊗ x' xi, B_dag c2> = <B c1, c2 ⊗ x'* xi>` over a spanning
/// family of commutant vectors `(x' xi, x'* xi)`.
pub fn dagger_sesquilinear(b: &OperatorMatrix, commutant_pairs: &[(CVec, CVec)]) -> Result<OperatorMatrix> {
    let h = b.h;
    if commutant_pairs.len() != h {
        return Err(MatrixCalcError::Shape(format!("{} commutant vectors for dimension {h}", commutant_pairs.len())));
    }
    let g = CMat::from_columns(&commutant_pairs.iter().map(|(v, _)| v.clone()).collect::<Vec<_>>());
    let g_adj_inv = g.adjoint().try_inverse().ok_or(MatrixCalcError::Singular)?;
    let mut out = CMat::zeros(b.k1 * h, b.k2);
    for p in 0..b.k1 {
        for q in 0..b.k2 {
            let block = b.b.view((q * h, p), (h, 1)).into_owned();
            let rhs = CVec::from_iterator(h, commutant_pairs.iter().map(|(_, star)| block.dotc(star)));
            let col = &g_adj_inv * rhs;
            out.view_mut((p * h, q), (h, 1)).copy_from(&col);
        }
    }
    OperatorMatrix::new(out, b.k2, b.k1, h)
}

/// Commutant pairs `((I ⊗ E_rs) xi, (I ⊗ E_sr) xi)` of a matrix model.
pub fn commutant_pairs(model: &MatrixModel) -> Vec<(CVec, CVec)> {
    let xi = model.xi();
    let mut out = Vec::with_capacity(model.dim());
    for r in 0..model.a {
        for s in 0..model.a {
            let y = model.embed_commutant(&model.matrix_unit(r, s));
            let y_star = model.embed_commutant(&model.matrix_unit(s, r));
            out.push((y * &xi, y_star * &xi));
        }
    }
    out
}

/// Integrand `[[0, M], [L, 0]]` on `C ⊕ k` at vector level: `L: C -> k ⊗ H`
/// and `M: k -> H`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockIntegrandMatrix {
    pub l: OperatorMatrix,
    pub m: OperatorMatrix,
}

impl BlockIntegrandMatrix {
    pub fn new(l: OperatorMatrix, m: OperatorMatrix) -> Result<Self> {
        if l.k1 != 1 || m.k2 != 1 || l.k2 != m.k1 || l.h != m.h {
            return Err(MatrixCalcError::Shape("blocks do not form [[0, M], [L, 0]]".into()));
        }
        Ok(Self { l, m })
    }

    pub fn k(&self) -> usize {
        self.l.k2
    }

    pub fn h(&self) -> usize {
        self.l.h
    }

    /// `F^[] = [L; M_T]`, a column over `k ⊕ k` of length `2*k*h`.
    pub fn column_transform(&self) -> CVec {
        let top = self.l.b.column(0).into_owned();
        let bottom = self.m.partial_transpose().b.column(0).into_owned();
        let mut out = CVec::zeros(top.len() + bottom.len());
        out.rows_mut(0, top.len()).copy_from(&top);
        out.rows_mut(top.len(), bottom.len()).copy_from(&bottom);
        out
    }

    /// `F† = [[0, L_dag], [M_dag, 0]]`.
    pub fn dagger(&self, s: &ConjLinearMap) -> BlockIntegrandMatrix {
        BlockIntegrandMatrix { l: self.m.dagger(s), m: self.l.dagger(s) }
    }

    /// Same as `dagger` with each block built from the sesquilinear characterisation.
    pub fn dagger_sesquilinear(&self, pairs: &[(CVec, CVec)]) -> Result<BlockIntegrandMatrix> {
        Ok(BlockIntegrandMatrix { l: dagger_sesquilinear(&self.m, pairs)?, m: dagger_sesquilinear(&self.l, pairs)? })
    }
}

/// `(k^pi ⊗ S)` on a column over `k ⊕ k`: swaps the halves, conjugates the
/// multiplicity leg and applies `S` on the `H` leg.
pub fn kpi_s_column(col: &CVec, k: usize, s: &ConjLinearMap) -> CVec {
    let h = s.kernel.nrows();
    let half = k * h;
    assert_eq!(col.len(), 2 * half);
    let lift = CMat::identity(k, k).kronecker(&s.kernel);
    let top = col.rows(0, half).map(|z| z.conj());
    let bottom = col.rows(half, half).map(|z| z.conj());
    let mut out = CVec::zeros(2 * half);
    out.rows_mut(0, half).copy_from(&(&lift * bottom));
    out.rows_mut(half, half).copy_from(&(&lift * top));
    out
}

/// `J Delta J` for checking against `Delta^{-1}`.
pub fn j_delta_j(data: &ModularData) -> CMat {
    let jk = &data.j.kernel;
    jk * conj_mat(&data.delta) * conj_mat(jk)
}

pub fn delta_inverse(data: &ModularData) -> CMat {
    hermitian_fn(&data.delta, |l| 1.0 / l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, max_abs_diff, random_cmat, random_cvec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn skewed() -> MatrixModel {
        MatrixModel::new(vec![0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap()
    }

    fn random_model<R: rand::Rng>(rng: &mut R, a: usize) -> MatrixModel {
        let mut w: Vec<f64> = (0..a).map(|_| rng.gen_range(0.2..1.0)).collect();
        let n: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.iter_mut().for_each(|x| *x /= n);
        MatrixModel::new(w).unwrap()
    }

    #[test]
    fn rejects_non_separating() {
        assert_eq!(
            MatrixModel::new(vec![1.0, 0.0]).unwrap_err(),
            MatrixCalcError::NotSeparating { index: 1, value: 0.0 }
        );
    }

    #[test]
    fn tracial_modular_data() {
        let model = MatrixModel::tracial(2);
        let data = brute_force_modular(&model).unwrap();
        assert!(max_abs_diff(&data.delta, &CMat::identity(4, 4)) < 1e-12);
        assert!(max_abs_diff(&data.s.kernel, &data.j.kernel) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_cvec(&mut rng, 2, 1.0);
        let v = random_cvec(&mut rng, 2, 1.0);
        let lhs = data.j.apply(&u.kronecker(&v));
        let rhs = v.map(|z| z.conj()).kronecker(&u.map(|z| z.conj()));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn skewed_modular_spectrum() {
        let data = brute_force_modular(&skewed()).unwrap();
        let eig = hermitian_eigenvalues(&data.delta);
        for (got, want) in eig.iter().zip([0.25, 1.0, 1.0, 4.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn modular_oracle_on_product_basis() {
        let model = skewed();
        let data = brute_force_modular(&model).unwrap();
        let l = &model.lambda;
        for p in 0..2 {
            for q in 0..2 {
                let mut e = CVec::zeros(4);
                e[p * 2 + q] = c(1.0, 0.0);
                let mut expected = CVec::zeros(4);
                expected[q * 2 + p] = c(l[p] / l[q], 0.0);
                assert!((data.s.apply(&e) - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn modular_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = random_model(&mut rng, 3);
        let data = brute_force_modular(&model).unwrap();
        let n = model.dim();
        assert!(max_abs_diff(&data.s.compose(&data.s), &CMat::identity(n, n)) < 1e-10);
        assert!(hermitian_eigenvalues(&data.delta)[0] > 0.0);
        assert!(max_abs_diff(&j_delta_j(&data), &delta_inverse(&data)) < 1e-10);
        let x = random_cmat(&mut rng, 3, 3, 1.0);
        let lhs = data.s.apply(&model.vector_from_op(&x));
        assert!((lhs - model.vector_from_op(&x.adjoint())).norm() < 1e-12);
        // S = J Delta^{1/2}
        assert!(max_abs_diff(&data.s.kernel, &(&data.j.kernel * conj_mat(&data.delta_half))) < 1e-10);
    }

    #[test]
    fn vector_operator_correspondence() {
        let model = skewed();
        assert_eq!(model.vector_from_op(&CMat::identity(2, 2)), model.xi());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_cmat(&mut rng, 2, 2, 1.0);
        assert!(max_abs_diff(&model.op_from_vector(&model.vector_from_op(&x)).unwrap(), &x) < 1e-12);
        let mut h = CVec::zeros(4);
        h[1] = c(1.0, 0.0);
        let expected = model.matrix_unit(0, 1) / c(model.lambda[1], 0.0);
        assert!(max_abs_diff(&model.op_from_vector(&h).unwrap(), &expected) < 1e-15);
    }

    #[test]
    fn partial_transpose_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = random_cmat(&mut rng, 3, 2, 1.0);
        let eta = random_cvec(&mut rng, 4, 1.0);
        let b = OperatorMatrix::simple(&theta, &eta);
        let bt = b.partial_transpose();
        assert!(bt.max_abs_diff(&OperatorMatrix::simple(&theta.transpose(), &eta)) < 1e-15);
        let r = OperatorMatrix::new(random_cmat(&mut rng, 3 * 4, 2, 1.0), 2, 3, 4).unwrap();
        assert_eq!(r.partial_transpose().partial_transpose(), r);
        assert!((r.partial_transpose().hs_norm() - r.hs_norm()).abs() < 1e-13);
    }

    #[test]
    fn partial_transpose_characterisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = OperatorMatrix::new(random_cmat(&mut rng, 2 * 3, 2, 1.0), 2, 2, 3).unwrap();
        let bt = b.partial_transpose();
        let c1 = random_cvec(&mut rng, 2, 1.0);
        let c2 = random_cvec(&mut rng, 2, 1.0);
        let v = random_cvec(&mut rng, 3, 1.0);
        let lhs = c1.kronecker(&v).dotc(&(&bt.b * &c2));
        let rhs = c2.map(|z| z.conj()).kronecker(&v).dotc(&(&b.b * c1.map(|z| z.conj())));
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn dagger_of_simple_tensor() {
        let model = skewed();
        let data = brute_force_modular(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_cmat(&mut rng, 2, 3, 1.0);
        let eta = random_cvec(&mut rng, 4, 1.0);
        let b = OperatorMatrix::simple(&a, &eta);
        let expected = OperatorMatrix::simple(&a.adjoint(), &data.s.apply(&eta));
        assert!(b.dagger(&data.s).max_abs_diff(&expected) < 1e-12);

        let tracial = MatrixModel::tracial(2);
        let tdata = brute_force_modular(&tracial).unwrap();
        let b = OperatorMatrix::simple(&a, &tracial.xi());
        assert!(b.dagger(&tdata.s).max_abs_diff(&OperatorMatrix::simple(&a.adjoint(), &tracial.xi())) < 1e-12);
    }

    #[test]
    fn dagger_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = random_model(&mut rng, 2);
        let data = brute_force_modular(&model).unwrap();
        let s = &data.s;
        let b = OperatorMatrix::new(random_cmat(&mut rng, 3 * 4, 2, 1.0), 2, 3, 4).unwrap();
        assert!(b.dagger(s).dagger(s).max_abs_diff(&b) < 1e-12);
        let conj = b.conjugate(s);
        assert!(b.dagger(s).partial_transpose().max_abs_diff(&conj) < 1e-12);
        assert!(b.partial_transpose().dagger(s).max_abs_diff(&conj) < 1e-12);
    }

    #[test]
    fn dagger_two_constructions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = random_model(&mut rng, 3);
        let data = brute_force_modular(&model).unwrap();
        let pairs = commutant_pairs(&model);
        let b = OperatorMatrix::new(random_cmat(&mut rng, 2 * 9, 3, 1.0), 3, 2, 9).unwrap();
        let direct = dagger_sesquilinear(&b, &pairs).unwrap();
        assert!(direct.max_abs_diff(&b.dagger(&data.s)) < 1e-12);
    }

    #[test]
    fn module_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = skewed();
        let data = brute_force_modular(&model).unwrap();
        let b = OperatorMatrix::new(random_cmat(&mut rng, 3 * 4, 2, 1.0), 2, 3, 4).unwrap();
        let t = random_cmat(&mut rng, 2, 3, 1.0);
        let cm = random_cmat(&mut rng, 2, 2, 1.0);
        let prod = b.module_product(&t, &cm);
        let tr = b.partial_transpose().module_product(&cm.transpose(), &t.transpose());
        assert!(prod.partial_transpose().max_abs_diff(&tr) < 1e-12);
        let dg = b.dagger(&data.s).module_product(&cm.adjoint(), &t.adjoint());
        assert!(prod.dagger(&data.s).max_abs_diff(&dg) < 1e-12);
    }

    #[test]
    fn column_transform_example() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = random_cvec(&mut rng, 2, 1.0);
        let g = random_cvec(&mut rng, 2, 1.0);
        let x = random_cvec(&mut rng, 4, 1.0);
        let y = random_cvec(&mut rng, 4, 1.0);
        let l = OperatorMatrix::simple(&CMat::from_column_slice(2, 1, f.as_slice()), &y);
        let m = OperatorMatrix::simple(&CMat::from_row_slice(1, 2, g.map(|z| z.conj()).as_slice()), &x);
        let col = BlockIntegrandMatrix::new(l, m).unwrap().column_transform();
        let mut expected = CVec::zeros(16);
        expected.rows_mut(0, 8).copy_from(&f.kronecker(&y));
        expected.rows_mut(8, 8).copy_from(&g.map(|z| z.conj()).kronecker(&x));
        assert!((col - expected).norm() < 1e-15);

        let zero = BlockIntegrandMatrix::new(OperatorMatrix::zeros(1, 2, 4), OperatorMatrix::zeros(2, 1, 4)).unwrap();
        assert_eq!(zero.column_transform().norm(), 0.0);
    }

    #[test]
    fn column_transform_dagger_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = MatrixModel::tracial(2);
        let data = brute_force_modular(&model).unwrap();
        let pairs = commutant_pairs(&model);
        for _ in 0..10 {
            let l = OperatorMatrix::new(random_cmat(&mut rng, 3 * 4, 1, 1.0), 1, 3, 4).unwrap();
            let m = OperatorMatrix::new(random_cmat(&mut rng, 4, 3, 1.0), 3, 1, 4).unwrap();
            let f = BlockIntegrandMatrix::new(l, m).unwrap();
            let lhs = f.dagger_sesquilinear(&pairs).unwrap().column_transform();
            let rhs = kpi_s_column(&f.column_transform(), 3, &data.s);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
