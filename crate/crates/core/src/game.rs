//! The congestion game itself: resources with congestion functions,
//! populations choosing among bundles of resources, and the map from a
//! bundle distribution to loads and losses.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance below which negative probabilities are treated as float noise.
const NEGATIVE_NOISE: f64 = 1e-12;
/// Largest deviation of a block sum from 1 that is silently renormalized.
const RENORMALIZE_TOL: f64 = 1e-9;

/// A non-negative, non-decreasing, Lipschitz map from resource load to loss.
///
/// Every load-dependent coefficient is required to be non-negative, which
/// makes monotonicity hold by construction and gives closed-form
/// antiderivatives for the potential.
#[derive(Debug, Clone, PartialEq)]
pub enum CongestionFunction {
    /// `c(u) = b`
    Constant(f64),
    /// `c(u) = slope * u + intercept`
    Affine { slope: f64, intercept: f64 },
    /// `c(u) = c_0 + c_1 u + ... + c_d u^d`
    Polynomial(Vec<f64>),
}

fn check_coefficient(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidFunction(format!(
            "{name} must be finite and non-negative, got {value}"
        )));
    }
    Ok(())
}

impl CongestionFunction {
    pub fn constant(value: f64) -> Result<Self> {
        let f = CongestionFunction::Constant(value);
        f.validate()?;
        Ok(f)
    }

    pub fn affine(slope: f64, intercept: f64) -> Result<Self> {
        let f = CongestionFunction::Affine { slope, intercept };
        f.validate()?;
        Ok(f)
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        let f = CongestionFunction::Polynomial(coefficients);
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CongestionFunction::Constant(b) => check_coefficient("constant", *b),
            CongestionFunction::Affine { slope, intercept } => {
                check_coefficient("slope", *slope)?;
                check_coefficient("intercept", *intercept)
            }
            CongestionFunction::Polynomial(c) => {
                if c.is_empty() {
                    return Err(Error::InvalidFunction(
                        "polynomial needs at least one coefficient".into(),
                    ));
                }
                c.iter()
                    .enumerate()
                    .try_for_each(|(i, &ci)| check_coefficient(&format!("coefficient c_{i}"), ci))
            }
        }
    }

    pub fn eval(&self, load: f64) -> f64 {
        match self {
            CongestionFunction::Constant(b) => *b,
            CongestionFunction::Affine { slope, intercept } => slope * load + intercept,
            CongestionFunction::Polynomial(c) => {
                c.iter().rev().fold(0.0, |acc, &ci| acc * load + ci)
            }
        }
    }

    /// `∫_0^load c(u) du`, in closed form.
    pub fn integral(&self, load: f64) -> f64 {
        match self {
            CongestionFunction::Constant(b) => b * load,
            CongestionFunction::Affine { slope, intercept } => {
                0.5 * slope * load * load + intercept * load
            }
            CongestionFunction::Polynomial(c) => {
                // Horner on the antiderivative coefficients c_i / (i + 1).
                let inner = c
                    .iter()
                    .enumerate()
                    .rev()
                    .fold(0.0, |acc, (i, &ci)| acc * load + ci / (i as f64 + 1.0));
                inner * load
            }
        }
    }

    pub fn derivative(&self, load: f64) -> f64 {
        match self {
            CongestionFunction::Constant(_) => 0.0,
            CongestionFunction::Affine { slope, .. } => *slope,
            CongestionFunction::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, &ci)| acc * load + i as f64 * ci),
        }
    }

    /// Lipschitz constant on `[0, bound]`. The derivative is non-negative and
    /// non-decreasing, so its value at the right end point is the constant.
    pub fn lipschitz(&self, bound: f64) -> f64 {
        self.derivative(bound.max(0.0))
    }

    /// Highest power of the load with a non-zero coefficient.
    pub fn degree(&self) -> usize {
        match self {
            CongestionFunction::Constant(_) => 0,
            CongestionFunction::Affine { slope, .. } => usize::from(*slope != 0.0),
            CongestionFunction::Polynomial(c) => c.iter().rposition(|&ci| ci != 0.0).unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub mass: f64,
    /// Each bundle is a set of resource indices. Order is significant: every
    /// per-population vector in the crate is indexed by it.
    pub bundles: Vec<Vec<usize>>,
}

impl Population {
    pub fn new(mass: f64, bundles: Vec<Vec<usize>>) -> Self {
        Population { mass, bundles }
    }
}

/// Resources, populations and congestion functions of a non-atomic game.
///
/// Validated on construction; the incidence matrices are built once and
/// cached since every loss evaluation goes through them.
#[derive(Debug, Clone)]
pub struct CongestionModel {
    resource_names: Vec<String>,
    functions: Vec<CongestionFunction>,
    populations: Vec<Population>,
    incidence: IncidenceMatrices,
}

impl CongestionModel {
    pub fn new(functions: Vec<CongestionFunction>, populations: Vec<Population>) -> Result<Self> {
        let names = (0..functions.len()).map(|r| format!("r{r}")).collect();
        Self::with_names(names, functions, populations)
    }

    pub fn with_names(
        resource_names: Vec<String>,
        functions: Vec<CongestionFunction>,
        populations: Vec<Population>,
    ) -> Result<Self> {
        if resource_names.len() != functions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} resource names for {} congestion functions",
                resource_names.len(),
                functions.len()
            )));
        }
        for f in &functions {
            f.validate()?;
        }
        if populations.is_empty() {
            return Err(Error::NoPopulations);
        }
        let n_resources = functions.len();
        for (k, pop) in populations.iter().enumerate() {
            if !(pop.mass.is_finite() && pop.mass > 0.0) {
                return Err(Error::InvalidMass {
                    population: k,
                    mass: pop.mass,
                });
            }
            if pop.bundles.is_empty() {
                return Err(Error::EmptyBundleSet { population: k });
            }
            for (p, bundle) in pop.bundles.iter().enumerate() {
                let invalid = |reason: String| Error::InvalidBundle {
                    population: k,
                    bundle: p,
                    reason,
                };
                if bundle.is_empty() {
                    return Err(invalid("bundle is empty".into()));
                }
                if let Some(&r) = bundle.iter().find(|&&r| r >= n_resources) {
                    return Err(invalid(format!(
                        "resource {r} out of range ({n_resources} resources)"
                    )));
                }
                let mut sorted = bundle.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(invalid("resource listed twice".into()));
                }
            }
        }
        let incidence = build_incidence_parts(n_resources, &populations);
        Ok(CongestionModel {
            resource_names,
            functions,
            populations,
            incidence,
        })
    }

    pub fn num_resources(&self) -> usize {
        self.functions.len()
    }

    pub fn num_populations(&self) -> usize {
        self.populations.len()
    }

    pub fn populations(&self) -> &[Population] {
        &self.populations
    }

    pub fn population(&self, k: usize) -> &Population {
        &self.populations[k]
    }

    pub fn functions(&self) -> &[CongestionFunction] {
        &self.functions
    }

    pub fn resource_names(&self) -> &[String] {
        &self.resource_names
    }

    pub fn bundle_counts(&self) -> Vec<usize> {
        self.populations.iter().map(|p| p.bundles.len()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.populations.iter().map(|p| p.mass).sum()
    }

    pub fn incidence(&self) -> &IncidenceMatrices {
        &self.incidence
    }

    /// Losses at `mu`, using the cached incidence matrices.
    pub fn losses(&self, mu: &ProductDistribution) -> Result<LossProfile> {
        evaluate_losses(self, &self.incidence, mu)
    }

    /// Resource loads `M̄ μ` for arbitrary per-population vectors, which need
    /// not lie on the simplex (used for finite differences and line search).
    pub fn resource_loads(&self, blocks: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_block_shape(blocks)?;
        let flat = DVector::from_iterator(
            self.incidence.scaled.ncols(),
            blocks.iter().flatten().copied(),
        );
        Ok((&self.incidence.scaled * flat).iter().copied().collect())
    }

    /// `ℓ^k_p = Σ_{r∈p} c_r(φ_r)` for the given resource loads.
    pub fn bundle_losses_at(&self, loads: &[f64]) -> Vec<Vec<f64>> {
        let costs = DVector::from_iterator(
            loads.len(),
            self.functions.iter().zip(loads).map(|(f, &u)| f.eval(u)),
        );
        self.incidence
            .per_population
            .iter()
            .map(|m| (m.transpose() * &costs).iter().copied().collect())
            .collect()
    }

    fn check_block_shape(&self, blocks: &[Vec<f64>]) -> Result<()> {
        if blocks.len() != self.populations.len() {
            return Err(Error::DimensionMismatch(format!(
                "distribution has {} populations, model has {}",
                blocks.len(),
                self.populations.len()
            )));
        }
        for (k, (b, pop)) in blocks.iter().zip(&self.populations).enumerate() {
            if b.len() != pop.bundles.len() {
                return Err(Error::DimensionMismatch(format!(
                    "population {k}: distribution has {} entries, model has {} bundles",
                    b.len(),
                    pop.bundles.len()
                )));
            }
        }
        Ok(())
    }
}

/// One probability vector per population over its bundles: a point of the
/// product simplex Δ.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDistribution {
    blocks: Vec<Vec<f64>>,
}

impl ProductDistribution {
    /// Validates and renormalizes each block. Entries in `[-1e-12, 0)` are
    /// clipped to zero; block sums within 1e-9 of one are rescaled; anything
    /// worse is rejected.
    pub fn new(blocks: Vec<Vec<f64>>) -> Result<Self> {
        let mut blocks = blocks;
        for (k, block) in blocks.iter_mut().enumerate() {
            normalize_block(k, block)?;
        }
        Ok(ProductDistribution { blocks })
    }

    pub fn uniform(model: &CongestionModel) -> Self {
        Self::uniform_with_sizes(&model.bundle_counts())
    }

    pub fn uniform_with_sizes(sizes: &[usize]) -> Self {
        let blocks = sizes.iter().map(|&n| vec![1.0 / n as f64; n]).collect();
        ProductDistribution { blocks }
    }

    /// Every population concentrated on the given bundle.
    pub fn vertex(model: &CongestionModel, choice: &[usize]) -> Result<Self> {
        let sizes = model.bundle_counts();
        if choice.len() != sizes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} choices for {} populations",
                choice.len(),
                sizes.len()
            )));
        }
        let mut blocks = Vec::with_capacity(sizes.len());
        for (k, (&n, &p)) in sizes.iter().zip(choice).enumerate() {
            if p >= n {
                return Err(Error::NotADistribution {
                    population: k,
                    reason: format!("bundle {p} out of range ({n} bundles)"),
                });
            }
            let mut b = vec![0.0; n];
            b[p] = 1.0;
            blocks.push(b);
        }
        Ok(ProductDistribution { blocks })
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &[f64] {
        &self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<Vec<f64>> {
        self.blocks
    }

    pub fn num_populations(&self) -> usize {
        self.blocks.len()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn check_shape(&self, model: &CongestionModel) -> Result<()> {
        model.check_block_shape(&self.blocks)
    }

    /// All entries strictly positive.
    pub fn is_interior(&self) -> bool {
        self.blocks.iter().flatten().all(|&x| x > 0.0)
    }

    pub fn linf_distance(&self, other: &ProductDistribution) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .zip(other.blocks.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `t * self + (1 - t) * other`.
    pub fn mix(&self, t: f64, other: &ProductDistribution) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| t * x + (1.0 - t) * y)
                    .collect()
            })
            .collect();
        Self::new(blocks)
    }
}

fn normalize_block(k: usize, block: &mut [f64]) -> Result<()> {
    let fail = |reason: String| Error::NotADistribution {
        population: k,
        reason,
    };
    if block.is_empty() {
        return Err(fail("empty probability vector".into()));
    }
    for x in block.iter_mut() {
        if !x.is_finite() {
            return Err(fail(format!("non-finite entry {x}")));
        }
        if *x < 0.0 {
            if *x < -NEGATIVE_NOISE {
                return Err(fail(format!("negative entry {x}")));
            }
            *x = 0.0;
        }
    }
    let sum: f64 = block.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_TOL {
        return Err(fail(format!("entries sum to {sum}, expected 1")));
    }
    block.iter_mut().for_each(|x| *x /= sum);
    Ok(())
}

/// Resource/bundle incidence. Column order follows populations in order and
/// bundles in input order within each population.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrices {
    /// `M^k`: resources × bundles of population k, entries 0/1.
    pub per_population: Vec<DMatrix<f64>>,
    /// `M̄`: horizontal concatenation with block k scaled by `m_k`.
    pub scaled: DMatrix<f64>,
    /// `M`: unscaled horizontal concatenation.
    pub unscaled: DMatrix<f64>,
    /// Column offset of each population's block.
    pub offsets: Vec<usize>,
}

pub fn build_incidence(model: &CongestionModel) -> IncidenceMatrices {
    build_incidence_parts(model.num_resources(), model.populations())
}

fn build_incidence_parts(n_resources: usize, populations: &[Population]) -> IncidenceMatrices {
    let per_population: Vec<DMatrix<f64>> = populations
        .iter()
        .map(|pop| {
            let mut m = DMatrix::zeros(n_resources, pop.bundles.len());
            for (p, bundle) in pop.bundles.iter().enumerate() {
                for &r in bundle {
                    m[(r, p)] = 1.0;
                }
            }
            m
        })
        .collect();
    let total_cols: usize = per_population.iter().map(|m| m.ncols()).sum();
    let mut scaled = DMatrix::zeros(n_resources, total_cols);
    let mut unscaled = DMatrix::zeros(n_resources, total_cols);
    let mut offsets = Vec::with_capacity(populations.len());
    let mut col = 0;
    for (m, pop) in per_population.iter().zip(populations) {
        offsets.push(col);
        unscaled.columns_mut(col, m.ncols()).copy_from(m);
        scaled
            .columns_mut(col, m.ncols())
            .copy_from(&(m * pop.mass));
        col += m.ncols();
    }
    IncidenceMatrices {
        per_population,
        scaled,
        unscaled,
        offsets,
    }
}

/// Loads and losses induced by a bundle distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LossProfile {
    /// `φ = M̄ μ`
    pub resource_loads: Vec<f64>,
    /// `ℓ^k_p`
    pub bundle_losses: Vec<Vec<f64>>,
    /// `ℓ̄^k = ⟨μ^k, ℓ^k⟩`
    pub average_losses: Vec<f64>,
    /// `f^k_p = m_k μ^k_p`
    pub bundle_loads: Vec<Vec<f64>>,
}

impl LossProfile {
    pub fn min_loss(&self, k: usize) -> f64 {
        self.bundle_losses[k]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_k (ℓ̄^k − min_p ℓ^k_p)`, clamped at zero against rounding.
    pub fn nash_gap(&self) -> f64 {
        self.average_losses
            .iter()
            .enumerate()
            .map(|(k, &avg)| avg - self.min_loss(k))
            .fold(0.0, f64::max)
    }
}

pub fn evaluate_losses(
    model: &CongestionModel,
    incidence: &IncidenceMatrices,
    mu: &ProductDistribution,
) -> Result<LossProfile> {
    mu.check_shape(model)?;
    if incidence.scaled.nrows() != model.num_resources()
        || incidence.scaled.ncols() != mu.blocks().iter().map(Vec::len).sum::<usize>()
    {
        return Err(Error::DimensionMismatch(
            "incidence matrices do not match the model".into(),
        ));
    }
    let flat = DVector::from_vec(mu.flat());
    let loads: Vec<f64> = (&incidence.scaled * flat).iter().copied().collect();
    let costs = DVector::from_iterator(
        loads.len(),
        model
            .functions()
            .iter()
            .zip(&loads)
            .map(|(f, &u)| f.eval(u)),
    );
    let bundle_losses: Vec<Vec<f64>> = incidence
        .per_population
        .iter()
        .map(|m| (m.transpose() * &costs).iter().copied().collect())
        .collect();
    let average_losses = mu
        .blocks()
        .iter()
        .zip(&bundle_losses)
        .map(|(b, l)| b.iter().zip(l).map(|(x, y)| x * y).sum())
        .collect();
    let bundle_loads = mu
        .blocks()
        .iter()
        .zip(model.populations())
        .map(|(b, pop)| b.iter().map(|x| pop.mass * x).collect())
        .collect();
    Ok(LossProfile {
        resource_loads: loads,
        bundle_losses,
        average_losses,
        bundle_loads,
    })
}

/// Upper bound ρ on every bundle loss over Δ: each bundle evaluated with all
/// its resources at the total mass.
pub fn loss_upper_bound(model: &CongestionModel) -> f64 {
    let total = model.total_mass();
    let at_total: Vec<f64> = model.functions().iter().map(|f| f.eval(total)).collect();
    model
        .populations()
        .iter()
        .flat_map(|pop| &pop.bundles)
        .map(|bundle| bundle.iter().map(|&r| at_total[r]).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn nash_gap(model: &CongestionModel, mu: &ProductDistribution) -> Result<f64> {
    Ok(model.losses(mu)?.nash_gap())
}
