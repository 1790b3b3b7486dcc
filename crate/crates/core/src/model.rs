//! Multi-type offspring model: mean matrix, expected clusters and the tail
//! calculus of `alpha*`, `l*`, `alpha(J)` and the rate functions.
//!
//! Index conventions: `laws[j][i]` is the law of `B_{i<-j}` (children of type
//! `i` of a type-`j` parent). The mean matrix stores `E B_{i<-j}` at entry
//! `(i, j)`, so column `j` of `(I - Bbar)^{-1}` is `s_j = E S_j`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dims::{DimSet, MAX_DIM};
use crate::error::{Error, Result};
use crate::law::{LawSampler, OffspringLaw};

/// Two tail indices closer than this count as equal.
pub const TAIL_INDEX_TOLERANCE: f64 = 1e-12;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;

/// A subcritical model with its derived quantities.
///
/// Construction only requires subcriticality, so degenerate models (for
/// instance with no offspring at all) can still be simulated; [`Model::validate`]
/// checks the full set of structural assumptions.
#[derive(Debug, Clone)]
pub struct Model {
    d: usize,
    laws: Vec<Vec<OffspringLaw>>,
    samplers: Vec<Vec<LawSampler>>,
    mean: DMatrix<f64>,
    clusters: DMatrix<f64>,
    spectral_radius: f64,
    alpha_star: Vec<f64>,
    l_star: Vec<usize>,
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d: usize,
    /// `offspring[j][i]` is the law of `B_{i<-j}`.
    pub offspring: Vec<Vec<OffspringLaw>>,
}

impl ModelConfig {
    /// Parses a config, accepting `{"family":"zeta_tail","alpha":..,"mean":..}`
    /// as an alternative to an explicit activity.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text)?;
        let d = root
            .get("d")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidModel("missing integer field `d`".into()))?
            as usize;
        let rows = root
            .get("offspring")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidModel("missing array field `offspring`".into()))?;
        let mut offspring = Vec::with_capacity(rows.len());
        for (j, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| Error::InvalidModel(format!("offspring[{j}] is not an array")))?;
            let mut laws = Vec::with_capacity(row.len());
            for (i, law) in row.iter().enumerate() {
                laws.push(parse_law(law).map_err(|e| match e {
                    Error::InvalidLaw(msg) => Error::InvalidLaw(format!("offspring[{j}][{i}]: {msg}")),
                    other => other,
                })?);
            }
            offspring.push(laws);
        }
        let cfg = ModelConfig { d, offspring };
        cfg.check_shape()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    fn check_shape(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return Err(Error::InvalidModel(format!("d = {} outside 1..={MAX_DIM}", self.d)));
        }
        if self.offspring.len() != self.d || self.offspring.iter().any(|r| r.len() != self.d) {
            return Err(Error::InvalidModel(format!("offspring must be a {0}x{0} array", self.d)));
        }
        for row in &self.offspring {
            for law in row {
                law.check()?;
            }
        }
        Ok(())
    }
}

fn parse_law(v: &Value) -> Result<OffspringLaw> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::InvalidLaw("law must be an object".into()))?;
    let family = obj.get("family").and_then(Value::as_str);
    if family == Some("zeta_tail") && obj.contains_key("mean") {
        if obj.contains_key("p") {
            return Err(Error::InvalidLaw("give either `p` or `mean`, not both".into()));
        }
        let num = |k: &str| {
            obj.get(k)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::InvalidLaw(format!("missing number `{k}`")))
        };
        return OffspringLaw::zeta_tail_with_mean(num("alpha")?, num("mean")?);
    }
    let law: OffspringLaw =
        serde_json::from_value(v.clone()).map_err(|e| Error::InvalidLaw(e.to_string()))?;
    law.check()?;
    Ok(law)
}

/// Outcome of checking a model against the structural assumptions.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub d: usize,
    pub spectral_radius: f64,
    pub subcritical: bool,
    pub distinct_tail_indices: bool,
    /// `None` when the model is not subcritical (the inverse is meaningless).
    pub full_connectivity: Option<bool>,
    pub passed: bool,
    /// First failed assumption: `subcriticality`, `distinct_tail_indices` or
    /// `full_connectivity`.
    pub failure: Option<String>,
    pub message: Option<String>,
    pub tail_indices: Vec<TailIndex>,
    /// Columns `s_j = E S_j` (empty when not subcritical).
    pub expected_clusters: Vec<Vec<f64>>,
    pub alpha_star: Vec<f64>,
    pub l_star: Vec<usize>,
    #[serde(skip)]
    error: Option<ErrorKind>,
}

#[derive(Debug, Clone)]
enum ErrorKind {
    Sub(f64),
    Dup(String, String, f64),
    Conn(usize, usize, f64),
}

/// One tail index `alpha_{child <- parent}`.
#[derive(Debug, Clone, Serialize)]
pub struct TailIndex {
    pub child: usize,
    pub parent: usize,
    pub alpha: f64,
}

impl ValidationReport {
    /// The first violated assumption as an error.
    pub fn into_result(self) -> Result<Self> {
        match self.error.clone() {
            None => Ok(self),
            Some(ErrorKind::Sub(r)) => Err(Error::SubcriticalityViolation { spectral_radius: r }),
            Some(ErrorKind::Dup(first, second, alpha)) => {
                Err(Error::DuplicateTailIndex { first, second, alpha })
            }
            Some(ErrorKind::Conn(root, component, value)) => Err(Error::ConnectivityViolation {
                root,
                component,
                value,
            }),
        }
    }
}

/// Checks a config against subcriticality, distinct tail indices and full
/// connectivity. Never fails; the report carries the verdict.
pub fn validate(cfg: &ModelConfig) -> ValidationReport {
    let d = cfg.d;
    let mean = mean_matrix(&cfg.offspring);
    let rho = spectral_radius(&mean);
    let (alpha_star, l_star) = alpha_star_lstar_of(&cfg.offspring);

    let mut tail_indices: Vec<TailIndex> = (0..d)
        .flat_map(|j| {
            (0..d).map(move |i| (i, j))
        })
        .map(|(i, j)| TailIndex {
            child: i,
            parent: j,
            alpha: cfg.offspring[j][i].alpha(),
        })
        .collect();
    tail_indices.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));

    let mut report = ValidationReport {
        d,
        spectral_radius: rho,
        subcritical: is_subcritical(rho),
        distinct_tail_indices: true,
        full_connectivity: None,
        passed: false,
        failure: None,
        message: None,
        tail_indices,
        expected_clusters: Vec::new(),
        alpha_star,
        l_star: l_star.clone(),
        error: None,
    };

    let fail = |r: &mut ValidationReport, name: &str, kind: ErrorKind| {
        if r.error.is_none() {
            r.failure = Some(name.to_string());
            r.error = Some(kind);
        }
    };

    if !report.subcritical {
        fail(&mut report, "subcriticality", ErrorKind::Sub(rho));
    }
    for w in report.tail_indices.clone().windows(2) {
        if (w[1].alpha - w[0].alpha).abs() <= TAIL_INDEX_TOLERANCE {
            report.distinct_tail_indices = false;
            let name = |t: &TailIndex| format!("{}<-{}", t.child, t.parent);
            fail(
                &mut report,
                "distinct_tail_indices",
                ErrorKind::Dup(name(&w[0]), name(&w[1]), w[0].alpha),
            );
            break;
        }
    }
    if report.subcritical {
        if let Some(inv) = cluster_matrix(&mean) {
            report.expected_clusters = (0..d).map(|j| inv.column(j).iter().copied().collect()).collect();
            let reach = reachability(&mean);
            let mut connected = true;
            'outer: for j in 0..d {
                for l in 0..d {
                    if !reach[j][l] || inv[(l, j)] <= 0.0 {
                        connected = false;
                        fail(
                            &mut report,
                            "full_connectivity",
                            ErrorKind::Conn(j + 1, l + 1, if reach[j][l] { inv[(l, j)] } else { 0.0 }),
                        );
                        break 'outer;
                    }
                }
            }
            report.full_connectivity = Some(connected);
        }
    }
    report.passed = report.error.is_none();
    if let Some(kind) = report.error.clone() {
        report.message = Some(
            ValidationReport { error: Some(kind), ..report.clone() }
                .into_result()
                .unwrap_err()
                .to_string(),
        );
    }
    report
}

fn is_subcritical(rho: f64) -> bool {
    rho < 1.0 - 1e-10
}

/// `reach[j][l]`: a type-`j` root has positive probability of a type-`l`
/// descendant (or `l == j`).
fn reachability(mean: &DMatrix<f64>) -> Vec<Vec<bool>> {
    let d = mean.nrows();
    let mut reach = vec![vec![false; d]; d];
    for (j, row) in reach.iter_mut().enumerate() {
        row[j] = true;
        let mut stack = vec![j];
        while let Some(u) = stack.pop() {
            for v in 0..d {
                if mean[(v, u)] > 0.0 && !row[v] {
                    row[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    reach
}

fn mean_matrix(laws: &[Vec<OffspringLaw>]) -> DMatrix<f64> {
    let d = laws.len();
    DMatrix::from_fn(d, d, |i, j| laws[j][i].mean())
}

fn cluster_matrix(mean: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = mean.nrows();
    (DMatrix::identity(d, d) - mean).try_inverse()
}

fn alpha_star_lstar_of(laws: &[Vec<OffspringLaw>]) -> (Vec<f64>, Vec<usize>) {
    let d = laws.len();
    (0..d)
        .map(|j| {
            (0..d)
                .map(|l| (laws[l][j].alpha(), l))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("d >= 1")
        })
        .unzip()
}

/// Spectral radius of a nonnegative matrix.
///
/// Power iteration runs on `A + I` from the all-ones vector: the shift keeps
/// the dominant eigenvalue strictly dominant for periodic matrices and does
/// not change the Perron vector.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let d = a.nrows();
    let shifted = a + DMatrix::<f64>::identity(d, d);
    let mut v = DVector::from_element(d, 1.0);
    let mut mu = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let w = &shifted * &v;
        let norm = w.amax();
        let next = norm / v.amax();
        v = w / norm;
        if (next - mu).abs() <= POWER_TOL * next.max(1.0) {
            return next - 1.0;
        }
        mu = next;
    }
    mu - 1.0
}

impl Model {
    /// Builds a model; only subcriticality is required.
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.check_shape()?;
        let ModelConfig { d, offspring: laws } = cfg;
        let mean = mean_matrix(&laws);
        let rho = spectral_radius(&mean);
        if !is_subcritical(rho) {
            return Err(Error::SubcriticalityViolation { spectral_radius: rho });
        }
        let clusters = cluster_matrix(&mean)
            .ok_or(Error::SubcriticalityViolation { spectral_radius: rho })?;
        let samplers = laws
            .iter()
            .map(|row| row.iter().map(OffspringLaw::sampler).collect())
            .collect();
        let (alpha_star, l_star) = alpha_star_lstar_of(&laws);
        Ok(Model {
            d,
            laws,
            samplers,
            mean,
            clusters,
            spectral_radius: rho,
            alpha_star,
            l_star,
        })
    }

    /// Builds a model that satisfies every structural assumption.
    pub fn new_validated(cfg: ModelConfig) -> Result<Self> {
        cfg.check_shape()?;
        validate(&cfg).into_result()?;
        Self::new(cfg)
    }

    /// Convenience constructor from a `laws[j][i]` array.
    pub fn from_laws(laws: Vec<Vec<OffspringLaw>>) -> Result<Self> {
        Self::new(ModelConfig { d: laws.len(), offspring: laws })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::new(ModelConfig::from_json_str(text)?)
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            d: self.d,
            offspring: self.laws.clone(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.config())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Law of `B_{child <- parent}`.
    pub fn law(&self, child: usize, parent: usize) -> &OffspringLaw {
        &self.laws[parent][child]
    }

    pub(crate) fn sampler(&self, child: usize, parent: usize) -> &LawSampler {
        &self.samplers[parent][child]
    }

    /// Entry `(i, j)` is `E B_{i<-j}`.
    pub fn mean_matrix(&self) -> &DMatrix<f64> {
        &self.mean
    }

    /// Column `j` is `s_j = E S_j`.
    pub fn cluster_matrix(&self) -> &DMatrix<f64> {
        &self.clusters
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// `s_j = E S_j`.
    pub fn expected_cluster(&self, j: usize) -> Vec<f64> {
        self.clusters.column(j).iter().copied().collect()
    }

    /// `s_{i,l}`: the `l`-th coordinate of `s_i`.
    pub fn s_bar(&self, i: usize, l: usize) -> f64 {
        self.clusters[(l, i)]
    }

    /// `(alpha*(j), l*(j))`: the heaviest tail among type-`j` offspring and the
    /// parent type producing it.
    pub fn alpha_star_lstar(&self, j: usize) -> (f64, usize) {
        (self.alpha_star[j], self.l_star[j])
    }

    pub fn alpha_star(&self) -> &[f64] {
        &self.alpha_star
    }

    pub fn l_star(&self) -> &[usize] {
        &self.l_star
    }

    /// `alpha(J) = 1 + sum_{i in J} (alpha*(i) - 1)`, and `0` for the empty set.
    pub fn alpha_of(&self, set: DimSet) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        1.0 + set.iter().map(|i| self.alpha_star[i] - 1.0).sum::<f64>()
    }

    /// Rate function `lambda_J(n) = n^{|J|-1} prod_{i in J} P(B_{i<-l*(i)} > n)`.
    pub fn rate_lambda(&self, set: DimSet, n: f64) -> Result<f64> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidArgument(format!("n = {n} must be positive")));
        }
        let mut v = n.powi(set.len() as i32 - 1);
        for i in set.iter() {
            v *= self.law(i, self.l_star[i]).survival(n);
        }
        Ok(v)
    }

    /// Entry `(i, j)` is `E[B_{i<-j}; B_{i<-j} <= m]`.
    pub fn truncated_mean_matrix(&self, m: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| self.laws[j][i].truncated_mean(m))
    }

    /// Column `j` is `E S_j^{<=}(m)`, the mean of the cluster pruned at `m`.
    pub fn pruned_cluster_matrix(&self, m: f64) -> DMatrix<f64> {
        let b = self.truncated_mean_matrix(m);
        cluster_matrix(&b).expect("pruned mean matrix is dominated by a subcritical one")
    }
}

/// Models used in tests, examples and documentation.
pub mod reference {
    use super::*;

    fn law(alpha: f64, mean: f64) -> OffspringLaw {
        OffspringLaw::zeta_tail_with_mean(alpha, mean).expect("reachable mean")
    }

    /// Two-type model with `alpha_{1<-1}=1.6`, `alpha_{2<-1}=3.4`,
    /// `alpha_{1<-2}=2.9`, `alpha_{2<-2}=2.2` and means `0.4, 0.1, 0.15, 0.35`.
    pub fn r2_config() -> ModelConfig {
        ModelConfig {
            d: 2,
            offspring: vec![
                vec![law(1.6, 0.4), law(3.4, 0.1)],
                vec![law(2.9, 0.15), law(2.2, 0.35)],
            ],
        }
    }

    pub fn r2() -> Model {
        Model::new(r2_config()).expect("reference model is subcritical")
    }

    /// Two-type model with `alpha_{1<-1} = 2.2 < alpha_{1<-2} = 2.6` and
    /// type-2 offspring tails `5.0, 5.3`, exceeding twice `alpha_{1<-1}`.
    pub fn tube_config() -> ModelConfig {
        ModelConfig {
            d: 2,
            offspring: vec![
                vec![law(2.2, 0.4), law(5.0, 0.3)],
                vec![law(2.6, 0.3), law(5.3, 0.2)],
            ],
        }
    }

    pub fn tube() -> Model {
        Model::new(tube_config()).expect("subcritical")
    }

    /// A model without any offspring (tail indices kept distinct).
    pub fn barren(d: usize) -> Model {
        let offspring = (0..d)
            .map(|j| {
                (0..d)
                    .map(|i| OffspringLaw::zeta_tail(2.0 + 0.1 * (j * d + i) as f64, 0.0).expect("valid"))
                    .collect()
            })
            .collect();
        Model::new(ModelConfig { d, offspring }).expect("zero mean matrix")
    }
}
