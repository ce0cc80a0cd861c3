//! Kraus operators tied to measurement periods, and the measurement sets
//! built from them.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::state::{BoundarySpec, MeasurementPeriod, MultiTimeState, TimeLabel};
use crate::tensor::{
    adjoint, c64, hermiticity_deviation, identity_deviation, kron_matrix, matmul, unitarity_deviation, DenseTensor,
    Tolerance,
};

/// Eigenvalues closer than this are treated as one degenerate eigenvalue.
pub const EIGEN_CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodBinding {
    pub period: MeasurementPeriod,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl PeriodBinding {
    pub fn new(period: MeasurementPeriod, in_dim: usize, out_dim: usize) -> Self {
        Self {
            period,
            in_dim,
            out_dim,
        }
    }

    pub fn square(period: MeasurementPeriod, d: usize) -> Self {
        Self {
            period,
            in_dim: d,
            out_dim: d,
        }
    }
}

/// One operator acting on one or more measurement periods.
///
/// The tensor has axes `[out_1, …, out_m, in_1, …, in_m]`, one pair per
/// binding. For a single period this is the usual `out × in` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausOperator {
    bindings: Vec<PeriodBinding>,
    tensor: DenseTensor,
}

impl KrausOperator {
    /// Accepts the operator either in axis form or as a
    /// `(Π out) × (Π in)` matrix with the first binding most significant.
    pub fn new(bindings: Vec<PeriodBinding>, tensor: DenseTensor) -> Result<Self> {
        if bindings.is_empty() {
            return Err(Error::Shape("operator binds no period".into()));
        }
        let distinct: BTreeSet<&MeasurementPeriod> = bindings.iter().map(|b| &b.period).collect();
        if distinct.len() != bindings.len() {
            return Err(Error::OverlappingPeriods("period bound twice".into()));
        }
        let dims: Vec<usize> = bindings
            .iter()
            .map(|b| b.out_dim)
            .chain(bindings.iter().map(|b| b.in_dim))
            .collect();
        let tensor = if tensor.dims() == dims.as_slice() {
            tensor
        } else {
            let rows: usize = bindings.iter().map(|b| b.out_dim).product();
            let cols: usize = bindings.iter().map(|b| b.in_dim).product();
            if tensor.dims() != [rows, cols] {
                return Err(Error::Shape(format!(
                    "operator dims {:?} do not fit bindings {:?}",
                    tensor.dims(),
                    dims
                )));
            }
            tensor.reshape(dims)?
        };
        Ok(Self { bindings, tensor })
    }

    pub fn single(period: MeasurementPeriod, matrix: DenseTensor) -> Result<Self> {
        let (out_dim, in_dim) = matrix.matrix_dims()?;
        Self::new(vec![PeriodBinding::new(period, in_dim, out_dim)], matrix)
    }

    pub fn bindings(&self) -> &[PeriodBinding] {
        &self.bindings
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    pub fn periods(&self) -> Vec<&MeasurementPeriod> {
        self.bindings.iter().map(|b| &b.period).collect()
    }

    /// `(Π out) × (Π in)` matrix form.
    pub fn as_matrix(&self) -> DenseTensor {
        self.tensor
            .as_matrix(self.bindings.len())
            .expect("operator axes are split evenly")
    }

    /// The operator read as a history: a bra at every period start and a
    /// ket at every period end. Open-ended periods take their missing label
    /// from `open_labels`.
    pub fn to_history(&self, open_labels: &BTreeMap<MeasurementPeriod, TimeLabel>) -> Result<MultiTimeState> {
        let label = |given: &Option<TimeLabel>, p: &MeasurementPeriod| -> Result<TimeLabel> {
            given
                .clone()
                .or_else(|| open_labels.get(p).cloned())
                .ok_or_else(|| Error::MissingPeriod(format!("no label for the open end of {p}")))
        };
        let mut boundaries = Vec::new();
        for b in &self.bindings {
            boundaries.push(BoundarySpec::ket(
                &b.period.system,
                label(&b.period.end, &b.period)?,
                b.out_dim,
            ));
        }
        for b in &self.bindings {
            boundaries.push(BoundarySpec::bra(
                &b.period.system,
                label(&b.period.start, &b.period)?,
                b.in_dim,
            ));
        }
        MultiTimeState::new(boundaries, self.tensor.clone())
    }
}

/// Result of a completeness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Completeness {
    pub complete: bool,
    pub max_deviation: f64,
}

/// A measurement: outcome labels, each with one or more Kraus operators
/// (the list is the sub-index of a general POVM).
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    bindings: Vec<PeriodBinding>,
    outcomes: Vec<(String, Vec<KrausOperator>)>,
}

impl KrausSet {
    /// Builds a set and checks completeness `Σ A†A = I`.
    pub fn new(
        bindings: Vec<PeriodBinding>,
        outcomes: Vec<(String, Vec<DenseTensor>)>,
        tol: Tolerance,
    ) -> Result<Self> {
        let set = Self::new_unchecked(bindings, outcomes)?;
        let c = set.check_complete(tol);
        if !c.complete {
            return Err(Error::IncompleteKraus {
                deviation: c.max_deviation,
            });
        }
        Ok(set)
    }

    /// Builds a set checking shapes only.
    pub fn new_unchecked(bindings: Vec<PeriodBinding>, outcomes: Vec<(String, Vec<DenseTensor>)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Shape("measurement has no outcomes".into()));
        }
        let mut seen = BTreeSet::new();
        let mut built = Vec::with_capacity(outcomes.len());
        for (label, ops) in outcomes {
            if !seen.insert(label.clone()) {
                return Err(Error::Shape(format!("duplicate outcome label '{label}'")));
            }
            if ops.is_empty() {
                return Err(Error::Shape(format!("outcome '{label}' has no operators")));
            }
            let ops = ops
                .into_iter()
                .map(|t| KrausOperator::new(bindings.clone(), t))
                .collect::<Result<Vec<_>>>()?;
            built.push((label, ops));
        }
        Ok(Self {
            bindings,
            outcomes: built,
        })
    }

    /// Convenience for single-period sets; dims are read from the operators.
    pub fn on_period(
        period: MeasurementPeriod,
        outcomes: Vec<(String, Vec<DenseTensor>)>,
        tol: Tolerance,
    ) -> Result<Self> {
        let first = outcomes
            .first()
            .and_then(|(_, ops)| ops.first())
            .ok_or_else(|| Error::Shape("measurement has no outcomes".into()))?;
        let (out_dim, in_dim) = first.matrix_dims()?;
        Self::new(vec![PeriodBinding::new(period, in_dim, out_dim)], outcomes, tol)
    }

    /// The "do nothing" measurement: one outcome, identity operator.
    pub fn identity(bindings: Vec<PeriodBinding>) -> Result<Self> {
        let d: usize = bindings.iter().map(|b| b.in_dim).product();
        if bindings.iter().any(|b| b.in_dim != b.out_dim) {
            return Err(Error::Shape("identity needs equal in and out dims".into()));
        }
        Self::new_unchecked(bindings, vec![("I".into(), vec![DenseTensor::identity(d)])])
    }

    pub fn bindings(&self) -> &[PeriodBinding] {
        &self.bindings
    }

    pub fn periods(&self) -> Vec<&MeasurementPeriod> {
        self.bindings.iter().map(|b| &b.period).collect()
    }

    pub fn outcomes(&self) -> &[(String, Vec<KrausOperator>)] {
        &self.outcomes
    }

    pub fn labels(&self) -> Vec<&str> {
        self.outcomes.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn outcome(&self, label: &str) -> Option<&[KrausOperator]> {
        self.outcomes
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, ops)| ops.as_slice())
    }

    pub fn check_complete(&self, tol: Tolerance) -> Completeness {
        let d: usize = self.bindings.iter().map(|b| b.in_dim).product();
        let mut sum = DenseTensor::zeros(vec![d, d]).expect("d >= 1");
        for (_, ops) in &self.outcomes {
            for op in ops {
                let m = op.as_matrix();
                let ata = matmul(&adjoint(&m).expect("matrix"), &m).expect("conformable");
                sum = sum.add(&ata).expect("same dims");
            }
        }
        let dev = identity_deviation(&sum).expect("square");
        Completeness {
            complete: dev <= tol.eq_tol,
            max_deviation: dev,
        }
    }
}

/// Canonical outcome label of an eigenvalue: 12 significant digits, no
/// trailing zeros, no negative zero. Values within the clustering
/// threshold of zero are labelled `0`.
pub fn eigenvalue_label(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let rounded = if rounded.abs() <= EIGEN_CLUSTER_TOL {
        0.0
    } else {
        rounded
    };
    format!("{rounded}")
}

/// Spectral projectors of a Hermitian matrix, by descending eigenvalue.
fn eigen_projectors(h: &DenseTensor) -> Result<Vec<(f64, DenseTensor)>> {
    let eig = hermitian_eigen(h)?;
    let d = eig.values.len();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 0..d {
        match clusters.last_mut() {
            Some(c) if eig.values[k] - eig.values[*c.last().unwrap()] <= EIGEN_CLUSTER_TOL => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    let v = eig.vectors.data();
    let mut out: Vec<(f64, DenseTensor)> = clusters
        .into_iter()
        .map(|cols| {
            let value = cols.iter().map(|&k| eig.values[k]).sum::<f64>() / cols.len() as f64;
            let mut p = vec![c64(0.0, 0.0); d * d];
            for &k in &cols {
                for i in 0..d {
                    for j in 0..d {
                        p[i * d + j] += v[i * d + k] * v[j * d + k].conj();
                    }
                }
            }
            (value, DenseTensor::new(vec![d, d], p).expect("finite projector"))
        })
        .collect();
    out.reverse();
    Ok(out)
}

fn check_hermitian(h: &DenseTensor, tol: Tolerance) -> Result<()> {
    let deviation = hermiticity_deviation(h)?;
    if deviation > tol.eq_tol {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Ideal von Neumann measurement of an observable: one projector per
/// distinct eigenvalue, labelled by the eigenvalue.
pub fn projective_set(observable: &DenseTensor, period: &MeasurementPeriod, tol: Tolerance) -> Result<KrausSet> {
    check_hermitian(observable, tol)?;
    let d = observable.matrix_dims()?.0;
    let outcomes = eigen_projectors(observable)?
        .into_iter()
        .map(|(x, p)| (eigenvalue_label(x), vec![p]))
        .collect();
    KrausSet::new(vec![PeriodBinding::square(period.clone(), d)], outcomes, tol)
}

/// A sum of single-period Hermitian operators, e.g. `σx(t1) − σx(t2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTimeObservable {
    terms: Vec<(f64, MeasurementPeriod, DenseTensor)>,
}

impl MultiTimeObservable {
    pub fn new(terms: Vec<(f64, MeasurementPeriod, DenseTensor)>, tol: Tolerance) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Shape("observable has no terms".into()));
        }
        for (_, _, h) in &terms {
            check_hermitian(h, tol)?;
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(f64, MeasurementPeriod, DenseTensor)] {
        &self.terms
    }
}

/// Projectors onto the eigenspaces of a multi-time observable. Each
/// projector spans all bound periods, first term's period most significant.
pub fn multi_time_projective_set(obs: &MultiTimeObservable, tol: Tolerance) -> Result<KrausSet> {
    let mut periods: Vec<&MeasurementPeriod> = Vec::new();
    for (_, p, _) in &obs.terms {
        if periods.contains(&p) {
            return Err(Error::OverlappingPeriods(p.to_string()));
        }
        periods.push(p);
    }
    let dims: Vec<usize> = obs
        .terms
        .iter()
        .map(|(_, _, h)| h.matrix_dims().map(|d| d.0))
        .collect::<Result<_>>()?;
    let total: usize = dims.iter().product();
    let mut joint = DenseTensor::zeros(vec![total, total])?;
    for (k, (c, _, h)) in obs.terms.iter().enumerate() {
        let mut term = DenseTensor::identity(1);
        for (j, &d) in dims.iter().enumerate() {
            let factor = if j == k { h.clone() } else { DenseTensor::identity(d) };
            term = kron_matrix(&term, &factor)?;
        }
        joint = joint.add(&term.scale(c64(*c, 0.0)))?;
    }
    let bindings = periods
        .iter()
        .zip(&dims)
        .map(|(p, &d)| PeriodBinding::square((*p).clone(), d))
        .collect();
    let outcomes = eigen_projectors(&joint)?
        .into_iter()
        .map(|(x, p)| (eigenvalue_label(x), vec![p]))
        .collect();
    KrausSet::new(bindings, outcomes, tol)
}

/// `A_k = U_after · P_k · U_before` for every operator of a single-period set,
/// rebound to `period`.
pub fn von_neumann_with_evolution(
    projectors: &KrausSet,
    u_before: &DenseTensor,
    u_after: &DenseTensor,
    period: &MeasurementPeriod,
    tol: Tolerance,
) -> Result<KrausSet> {
    if projectors.bindings.len() != 1 {
        return Err(Error::Shape("evolution applies to single-period sets".into()));
    }
    for u in [u_before, u_after] {
        let deviation = unitarity_deviation(u)?;
        if deviation > tol.eq_tol {
            return Err(Error::NotUnitary { deviation });
        }
    }
    let in_dim = u_before.matrix_dims()?.1;
    let out_dim = u_after.matrix_dims()?.0;
    let outcomes = projectors
        .outcomes
        .iter()
        .map(|(label, ops)| {
            let mats = ops
                .iter()
                .map(|op| matmul(&matmul(u_after, &op.as_matrix())?, u_before))
                .collect::<Result<Vec<_>>>()?;
            Ok((label.clone(), mats))
        })
        .collect::<Result<Vec<_>>>()?;
    KrausSet::new(vec![PeriodBinding::new(period.clone(), in_dim, out_dim)], outcomes, tol)
}

/// Merges outcomes: every fine label maps to a coarse label and the coarse
/// outcome carries all operators of its fine outcomes. Coarse labels keep
/// the order of their first fine outcome.
pub fn lump(set: &KrausSet, grouping: &BTreeMap<String, String>) -> Result<KrausSet> {
    let mut coarse: Vec<(String, Vec<KrausOperator>)> = Vec::new();
    for (fine, ops) in &set.outcomes {
        let target = grouping
            .get(fine)
            .ok_or_else(|| Error::IncompleteGrouping(fine.clone()))?;
        match coarse.iter_mut().find(|(l, _)| l == target) {
            Some((_, list)) => list.extend(ops.iter().cloned()),
            None => coarse.push((target.clone(), ops.clone())),
        }
    }
    Ok(KrausSet {
        bindings: set.bindings.clone(),
        outcomes: coarse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, random_state, random_unitary};
    use crate::state::probabilities;
    use crate::tensor::kron;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn period() -> MeasurementPeriod {
        MeasurementPeriod::closed("S", "t1", "t2")
    }

    fn sz() -> DenseTensor {
        DenseTensor::real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap()
    }

    fn sx() -> DenseTensor {
        DenseTensor::real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    #[test]
    fn projector_pair_is_complete() {
        let p = DenseTensor::real_matrix(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let q = DenseTensor::identity(2).sub(&p).unwrap();
        let set = KrausSet::new_unchecked(
            vec![PeriodBinding::square(period(), 2)],
            vec![("P".into(), vec![p]), ("Q".into(), vec![q])],
        )
        .unwrap();
        let c = set.check_complete(Tolerance::default());
        assert!(c.complete);
        assert!(c.max_deviation < 1e-15);
    }

    #[test]
    fn lone_projector_is_incomplete() {
        let p = DenseTensor::real_matrix(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let set =
            KrausSet::new_unchecked(vec![PeriodBinding::square(period(), 2)], vec![("P".into(), vec![p])]).unwrap();
        let c = set.check_complete(Tolerance::default());
        assert!(!c.complete);
        assert_eq!(c.max_deviation, 1.0);
    }

    #[test]
    fn unitary_singleton_is_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(&mut rng, 3);
        let set = KrausSet::on_period(period(), vec![("U".into(), vec![u])], Tolerance::default()).unwrap();
        assert!(set.check_complete(Tolerance::default()).complete);
    }

    #[test]
    fn sigma_z_projectors() {
        let set = projective_set(&sz(), &period(), Tolerance::default()).unwrap();
        assert_eq!(set.labels(), vec!["1", "-1"]);
        let up = set.outcome("1").unwrap()[0].as_matrix();
        assert!(up.approx_eq(&DenseTensor::real_matrix(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap(), 1e-14));
    }

    #[test]
    fn identity_is_fully_degenerate() {
        let set = projective_set(&DenseTensor::identity(3), &period(), Tolerance::default()).unwrap();
        assert_eq!(set.labels(), vec!["1"]);
        assert!(set.outcomes()[0].1[0]
            .as_matrix()
            .approx_eq(&DenseTensor::identity(3), 1e-12));
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let m = DenseTensor::real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            projective_set(&m, &period(), Tolerance::default()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn random_hermitian_projectors_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 4);
        let set = projective_set(&h, &period(), Tolerance::default()).unwrap();
        let ps: Vec<DenseTensor> = set.outcomes().iter().map(|(_, o)| o[0].as_matrix()).collect();
        assert_eq!(ps.len(), 4);
        let mut sum = DenseTensor::zeros(vec![4, 4]).unwrap();
        for (a, pa) in ps.iter().enumerate() {
            for (b, pb) in ps.iter().enumerate() {
                let prod = matmul(pa, pb).unwrap();
                let expect = if a == b {
                    pa.clone()
                } else {
                    DenseTensor::zeros(vec![4, 4]).unwrap()
                };
                assert!(prod.approx_eq(&expect, 1e-10));
            }
            sum = sum.add(pa).unwrap();
        }
        assert!(sum.approx_eq(&DenseTensor::identity(4), 1e-10));
    }

    #[test]
    fn eigenvalue_labels() {
        assert_eq!(eigenvalue_label(2.0000000000001), "2");
        assert_eq!(eigenvalue_label(-1e-17), "0");
        assert_eq!(eigenvalue_label(0.5), "0.5");
        assert_eq!(eigenvalue_label(-1.0), "-1");
    }

    fn sigma_difference(a: &DenseTensor, b: &DenseTensor, sign: f64) -> KrausSet {
        let obs = MultiTimeObservable::new(
            vec![
                (1.0, MeasurementPeriod::closed("S", "t1", "t2"), a.clone()),
                (sign, MeasurementPeriod::closed("S", "t3", "t4"), b.clone()),
            ],
            Tolerance::default(),
        )
        .unwrap();
        multi_time_projective_set(&obs, Tolerance::default()).unwrap()
    }

    fn rank(p: &DenseTensor) -> usize {
        let (d, _) = p.matrix_dims().unwrap();
        (0..d).map(|k| p.get(&[k, k]).unwrap().re).sum::<f64>().round() as usize
    }

    #[test]
    fn sigma_x_difference_has_three_eigenvalues() {
        let set = sigma_difference(&sx(), &sx(), -1.0);
        assert_eq!(set.labels(), vec!["2", "0", "-2"]);
        let ranks: Vec<usize> = set.outcomes().iter().map(|(_, o)| rank(&o[0].as_matrix())).collect();
        assert_eq!(ranks, vec![1, 2, 1]);
        // +2: ↑x on the first period, ↓x on the second
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let upx = DenseTensor::real_vector(&[h, h]).unwrap();
        let downx = DenseTensor::real_vector(&[h, -h]).unwrap();
        let v = kron(&upx, &downx).unwrap();
        let expect = kron(&v, &v.conj()).unwrap().reshape(vec![4, 4]).unwrap();
        assert!(set.outcome("2").unwrap()[0].as_matrix().approx_eq(&expect, 1e-10));
    }

    #[test]
    fn sigma_z_sum_zero_space() {
        let set = sigma_difference(&sz(), &sz(), 1.0);
        assert_eq!(set.labels(), vec!["2", "0", "-2"]);
        let p0 = set.outcome("0").unwrap()[0].as_matrix();
        // spanned by |01⟩ and |10⟩
        let mut expect = DenseTensor::zeros(vec![4, 4]).unwrap().into_data();
        expect[5] = c64(1.0, 0.0);
        expect[10] = c64(1.0, 0.0);
        assert!(p0.approx_eq(&DenseTensor::matrix(4, 4, expect).unwrap(), 1e-10));
    }

    #[test]
    fn single_term_matches_projective_set() {
        let obs = MultiTimeObservable::new(vec![(1.0, period(), sx())], Tolerance::default()).unwrap();
        let a = multi_time_projective_set(&obs, Tolerance::default()).unwrap();
        let b = projective_set(&sx(), &period(), Tolerance::default()).unwrap();
        assert_eq!(a.labels(), b.labels());
        for ((_, x), (_, y)) in a.outcomes().iter().zip(b.outcomes()) {
            assert!(x[0].as_matrix().approx_eq(&y[0].as_matrix(), 1e-12));
        }
    }

    #[test]
    fn overlapping_terms_are_rejected() {
        let obs = MultiTimeObservable::new(
            vec![(1.0, period(), sx()), (-1.0, period(), sz())],
            Tolerance::default(),
        )
        .unwrap();
        assert!(matches!(
            multi_time_projective_set(&obs, Tolerance::default()),
            Err(Error::OverlappingPeriods(_))
        ));
    }

    #[test]
    fn evolution_with_identities_is_bare() {
        let set = projective_set(&sz(), &period(), Tolerance::default()).unwrap();
        let id = DenseTensor::identity(2);
        let ev = von_neumann_with_evolution(&set, &id, &id, &period(), Tolerance::default()).unwrap();
        assert_eq!(ev, set);
    }

    #[test]
    fn evolution_keeps_completeness_and_rejects_non_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = projective_set(&random_hermitian(&mut rng, 3), &period(), Tolerance::default()).unwrap();
        let (u, v) = (random_unitary(&mut rng, 3), random_unitary(&mut rng, 3));
        let ev = von_neumann_with_evolution(&set, &u, &v, &period(), Tolerance::default()).unwrap();
        assert!(ev.check_complete(Tolerance::default()).complete);
        let bad = DenseTensor::identity(3).scale(c64(2.0, 0.0));
        assert!(matches!(
            von_neumann_with_evolution(&set, &bad, &v, &period(), Tolerance::default()),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn two_step_sequence_matches_sandwich_formula() {
        // A_{nk} = U2 Q_k U' P_n U1 inserted into ⟨Φ| |Ψ⟩
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (psi, phi) = (random_state(&mut rng, 2), random_state(&mut rng, 2));
        let (u1, u_mid, u2) = (
            random_unitary(&mut rng, 2),
            random_unitary(&mut rng, 2),
            random_unitary(&mut rng, 2),
        );
        let c = projective_set(&random_hermitian(&mut rng, 2), &period(), Tolerance::default()).unwrap();
        let d = projective_set(&random_hermitian(&mut rng, 2), &period(), Tolerance::default()).unwrap();
        let mut outcomes = Vec::new();
        let mut weights = Vec::new();
        let first = von_neumann_with_evolution(&c, &u1, &u_mid, &period(), Tolerance::default()).unwrap();
        for (ln, pn) in first.outcomes() {
            for (lk, qk) in d.outcomes() {
                let a = matmul(&u2, &matmul(&qk[0].as_matrix(), &pn[0].as_matrix()).unwrap()).unwrap();
                let amp = crate::tensor::inner(&phi, &crate::tensor::matvec(&a, &psi).unwrap()).unwrap();
                weights.push(amp.norm_sqr());
                outcomes.push((format!("{ln},{lk}"), vec![a]));
            }
        }
        let set = KrausSet::on_period(period(), outcomes, Tolerance::default()).unwrap();
        let state = MultiTimeState::two_time("S", "t1", &psi, "t2", &phi).unwrap();
        let dist = probabilities(&state, &[set.clone()], Tolerance::default()).unwrap();
        let n: f64 = weights.iter().sum();
        for ((label, _), w) in set.outcomes().iter().zip(&weights) {
            assert!((dist.probability(&[label]) - w / n).abs() < 1e-12);
        }
    }

    #[test]
    fn lump_sums_fine_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(&mut rng, 3);
        let fine = projective_set(&h, &period(), Tolerance::default()).unwrap();
        let labels: Vec<String> = fine.labels().iter().map(|s| s.to_string()).collect();
        let grouping: BTreeMap<String, String> = [
            (labels[0].clone(), "x".to_string()),
            (labels[1].clone(), "x".to_string()),
            (labels[2].clone(), "y".to_string()),
        ]
        .into();
        let coarse = lump(&fine, &grouping).unwrap();
        assert_eq!(coarse.labels(), vec!["x", "y"]);
        assert_eq!(coarse.outcome("x").unwrap().len(), 2);
        let state =
            MultiTimeState::two_time("S", "t1", &random_state(&mut rng, 3), "t2", &random_state(&mut rng, 3)).unwrap();
        let pf = probabilities(&state, &[fine], Tolerance::default()).unwrap();
        let pc = probabilities(&state, &[coarse], Tolerance::default()).unwrap();
        let expect = pf.probability(&[&labels[0]]) + pf.probability(&[&labels[1]]);
        assert!((pc.probability(&["x"]) - expect).abs() < 1e-12);
    }

    #[test]
    fn identity_grouping_and_missing_label() {
        let set = projective_set(&sz(), &period(), Tolerance::default()).unwrap();
        let same: BTreeMap<String, String> = [("1".into(), "1".into()), ("-1".into(), "-1".into())].into();
        assert_eq!(lump(&set, &same).unwrap(), set);
        let partial: BTreeMap<String, String> = [("1".into(), "1".into())].into();
        assert!(matches!(lump(&set, &partial), Err(Error::IncompleteGrouping(_))));
    }

    #[test]
    fn history_of_an_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = crate::random::random_matrix(&mut rng, 2, 2);
        let op = KrausOperator::single(period(), a.clone()).unwrap();
        let h = op.to_history(&BTreeMap::new()).unwrap();
        assert_eq!(h.boundaries()[0], BoundarySpec::bra("S", "t1", 2));
        assert_eq!(h.boundaries()[1], BoundarySpec::ket("S", "t2", 2));
        assert_eq!(h.amplitudes().get(&[1, 0]), a.get(&[0, 1]));
    }
}
