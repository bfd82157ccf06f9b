//! Synthetic data generation: structured scale matrices (tiled blocks,
//! random sparse graphs) and mixture sampling with full ground truth.
//!
//! All random draws go through f64 before conversion to the working scalar,
//! so a given seed produces the same draw sequence at every precision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::eigen::sym_eigenvalues;
use crate::linalg::{Matrix, SpdMatrix};
use crate::scalar::Scalar;
use crate::wishart::{wishart_sample, WishartComponent};

/// Which tiles along the diagonal carry the within-block value. The two
/// block-structured components of the default design use `Even` and `Odd`,
/// giving them disjoint off-diagonal supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockParity {
    All,
    Even,
    Odd,
}

impl BlockParity {
    fn selects(self, block: usize) -> bool {
        match self {
            BlockParity::All => true,
            BlockParity::Even => block % 2 == 0,
            BlockParity::Odd => block % 2 == 1,
        }
    }
}

/// Block-tiled scale matrix: diagonal `base_var`, `within` inside each
/// diagonal tile of `block_size` (the last tile may be ragged), `between`
/// everywhere else. The result must come out positive definite, otherwise
/// the values are rejected.
pub fn make_block_sigma<F: Scalar>(
    p: usize,
    block_size: usize,
    within: F,
    between: F,
    base_var: F,
) -> Result<SpdMatrix<F>> {
    make_block_sigma_active(p, block_size, within, between, base_var, BlockParity::All)
}

/// [`make_block_sigma`] restricted to tiles of one parity; skipped tiles
/// keep only the diagonal.
pub fn make_block_sigma_active<F: Scalar>(
    p: usize,
    block_size: usize,
    within: F,
    between: F,
    base_var: F,
    active: BlockParity,
) -> Result<SpdMatrix<F>> {
    if p == 0 || block_size == 0 {
        return Err(Error::domain(
            "block sigma needs p >= 1 and block_size >= 1",
        ));
    }
    let m = Matrix::from_fn(p, p, |i, j| {
        if i == j {
            base_var
        } else if i / block_size == j / block_size {
            if active.selects(i / block_size) {
                within
            } else {
                F::zero()
            }
        } else {
            between
        }
    });
    let spd = SpdMatrix::from_matrix(&m)?;
    if !spd.is_positive_definite() {
        return Err(Error::not_pd(format!(
            "block values (within {}, between {}, base {}) give an indefinite matrix",
            within.as_f64(),
            between.as_f64(),
            base_var.as_f64()
        )));
    }
    Ok(spd)
}

/// Random sparse scale matrix: each off-diagonal pair is active with
/// probability `edge_prob`, active entries get a uniform magnitude from
/// `value_range` with random sign, and the constant diagonal is inflated to
/// `max(1, 1.1 · spectral radius of the off-diagonal part)` so the result
/// is positive definite without touching the support.
pub fn make_er_sigma<F: Scalar, R: Rng + ?Sized>(
    p: usize,
    edge_prob: F,
    value_range: (F, F),
    rng: &mut R,
) -> Result<SpdMatrix<F>> {
    if p == 0 {
        return Err(Error::domain("er sigma needs p >= 1"));
    }
    let prob = edge_prob.as_f64();
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::domain(format!(
            "edge probability must lie in [0, 1], got {prob}"
        )));
    }
    let (lo, hi) = (value_range.0.as_f64(), value_range.1.as_f64());
    if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) {
        return Err(Error::domain(format!(
            "value range must satisfy 0 <= lo <= hi, got ({lo}, {hi})"
        )));
    }
    // Fixed draw order per pair: edge, then magnitude and sign if active.
    let mut off = Matrix::zeros(p, p);
    for j in 0..p {
        for h in (j + 1)..p {
            if rng.gen::<f64>() < prob {
                let mag = if lo == hi { lo } else { rng.gen_range(lo..hi) };
                let sign = if rng.gen::<f64>() < 0.5 { -1.0 } else { 1.0 };
                let v = F::of(sign * mag);
                off[(j, h)] = v;
                off[(h, j)] = v;
            }
        }
    }
    let radius = sym_eigenvalues(&off)?
        .iter()
        .fold(F::zero(), |acc, &v| acc.max(v.abs()));
    let diag = F::one().max(F::of(1.1) * radius);
    let m = Matrix::from_fn(p, p, |i, j| if i == j { diag } else { off[(i, j)] });
    let spd = SpdMatrix::from_matrix(&m)?;
    if !spd.is_positive_definite() {
        return Err(Error::numerical(
            "inflated-diagonal construction failed to produce a PD matrix",
        ));
    }
    Ok(spd)
}

/// Scale-matrix recipe for one mixture component.
#[derive(Debug, Clone)]
pub enum SigmaSpec<F> {
    Blocks {
        block_size: usize,
        within: F,
        between: F,
        base_var: F,
        active: BlockParity,
    },
    ErdosRenyi {
        edge_prob: F,
        value_lo: F,
        value_hi: F,
    },
    Explicit(SpdMatrix<F>),
}

impl<F: Scalar> SigmaSpec<F> {
    fn build<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Result<SpdMatrix<F>> {
        match self {
            SigmaSpec::Blocks {
                block_size,
                within,
                between,
                base_var,
                active,
            } => make_block_sigma_active(p, *block_size, *within, *between, *base_var, *active),
            SigmaSpec::ErdosRenyi {
                edge_prob,
                value_lo,
                value_hi,
            } => make_er_sigma(p, *edge_prob, (*value_lo, *value_hi), rng),
            SigmaSpec::Explicit(m) => {
                if m.dim() != p {
                    return Err(Error::dim("explicit sigma dimension", p, m.dim()));
                }
                Ok(m.clone())
            }
        }
    }
}

/// Full description of a synthetic mixture draw. `tau` entries may be zero
/// (those components are simply never drawn); degrees of freedom must
/// exceed p - 1 so every component has a density.
#[derive(Debug, Clone)]
pub struct SimSpec<F> {
    pub n: usize,
    pub p: usize,
    pub tau: Vec<F>,
    pub dofs: Vec<F>,
    pub sigma_specs: Vec<SigmaSpec<F>>,
    pub seed: u64,
}

/// True generating parameters returned alongside a sample. Not a fitted
/// model: `tau` may contain zeros here.
#[derive(Debug, Clone)]
pub struct GroundTruth<F> {
    pub tau: Vec<F>,
    pub components: Vec<WishartComponent<F>>,
}

impl<F: Scalar> SimSpec<F> {
    /// Three-component benchmark design: two block-tiled scale matrices with
    /// complementary active tiles, one random sparse structure, equal
    /// mixing, n = 200 matrices of dimension 25.
    pub fn standard_benchmark(seed: u64) -> SimSpec<F> {
        let third = F::one() / F::of(3.0);
        SimSpec {
            n: 200,
            p: 25,
            tau: vec![third; 3],
            dofs: vec![F::of(30.0), F::of(30.0), F::of(40.0)],
            sigma_specs: vec![
                SigmaSpec::Blocks {
                    block_size: 5,
                    within: F::of(0.6),
                    between: F::zero(),
                    base_var: F::one(),
                    active: BlockParity::Even,
                },
                SigmaSpec::Blocks {
                    block_size: 5,
                    within: F::of(0.6),
                    between: F::zero(),
                    base_var: F::one(),
                    active: BlockParity::Odd,
                },
                SigmaSpec::ErdosRenyi {
                    edge_prob: F::of(0.1),
                    value_lo: F::of(0.3),
                    value_hi: F::of(0.7),
                },
            ],
            seed,
        }
    }

    pub fn k(&self) -> usize {
        self.tau.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("n must be at least 1"));
        }
        if self.p == 0 {
            return Err(Error::domain("p must be at least 1"));
        }
        if self.tau.is_empty() {
            return Err(Error::domain("tau must have at least one component"));
        }
        if self.dofs.len() != self.k() {
            return Err(Error::LengthMismatch {
                left: self.k(),
                right: self.dofs.len(),
            });
        }
        if self.sigma_specs.len() != self.k() {
            return Err(Error::LengthMismatch {
                left: self.k(),
                right: self.sigma_specs.len(),
            });
        }
        let mut sum = F::zero();
        for &t in &self.tau {
            if !(t >= F::zero()) || !t.is_finite() {
                return Err(Error::domain(format!(
                    "tau entries must be finite and nonnegative, got {}",
                    t.as_f64()
                )));
            }
            sum = sum + t;
        }
        if (sum - F::one()).abs() > F::of(1e-8) {
            return Err(Error::domain(format!(
                "tau must sum to 1, got {}",
                sum.as_f64()
            )));
        }
        let min_dof = F::of((self.p - 1) as f64);
        for &nu in &self.dofs {
            if !(nu > min_dof) {
                return Err(Error::InvalidDof {
                    dof: nu.as_f64(),
                    min: min_dof.as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Draws a dataset from the mixture: builds the K scale matrices (in
/// component order, consuming the generator only for random structures),
/// then for each observation draws its component label and immediately its
/// matrix. Deterministic per seed.
pub fn sample_mixture<F: Scalar>(
    spec: &SimSpec<F>,
) -> Result<(Dataset<F>, Vec<usize>, GroundTruth<F>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.k();
    let mut components = Vec::with_capacity(k);
    for i in 0..k {
        let sigma = spec.sigma_specs[i].build(spec.p, &mut rng)?;
        components.push(WishartComponent::new(sigma, spec.dofs[i])?);
    }
    let cumulative: Vec<f64> = spec
        .tau
        .iter()
        .scan(0.0, |acc, &t| {
            *acc += t.as_f64();
            Some(*acc)
        })
        .collect();
    let mut labels = Vec::with_capacity(spec.n);
    let mut matrices = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let u = rng.gen::<f64>();
        let label = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(k - 1);
        labels.push(label);
        matrices.push(wishart_sample(&components[label], &mut rng)?);
    }
    let data = Dataset::new(matrices)?;
    let truth = GroundTruth {
        tau: spec.tau.clone(),
        components,
    };
    Ok((data, labels, truth))
}
