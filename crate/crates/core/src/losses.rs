//! Loss terms for the two training steps, and the same-label KNN used by
//! the local fairness term.
//!
//! Labels are carried as `i8` in `{-1, +1}` and sensitive attributes as
//! `u8` in `{0, 1}`; both are mapped to `{0, 1}` targets at BCE call sites.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, RowCombination, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Bound, Mlp, Mode};

/// Which Step II terms are active and how they are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the adversarial term.
    pub lambda1: f64,
    /// Weight of the local fairness term.
    pub lambda2: f64,
    /// Weight of the classification term.
    pub lambda3: f64,
    pub use_rec: bool,
    pub use_adv: bool,
    pub use_local: bool,
    pub use_cls: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.1,
            use_rec: true,
            use_adv: true,
            use_local: true,
            use_cls: true,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(alloc::format!("{name} must be finite and >= 0, got {w}")));
            }
        }
        Ok(())
    }

    /// A term is live when toggled on with a positive weight.
    pub fn rec_active(&self) -> bool {
        self.use_rec
    }

    pub fn adv_active(&self) -> bool {
        self.use_adv && self.lambda1 > 0.0
    }

    pub fn local_active(&self) -> bool {
        self.use_local && self.lambda2 > 0.0
    }

    pub fn cls_active(&self) -> bool {
        self.use_cls && self.lambda3 > 0.0
    }
}

/// `r = count(a=0) / count(a=1)` on the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationRatio(pub f64);

impl PopulationRatio {
    pub fn from_attributes(a: &[u8]) -> Result<Self> {
        let ones = a.iter().filter(|&&v| v == 1).count();
        let zeros = a.len() - ones;
        if ones == 0 || zeros == 0 {
            return Err(Error::Data(alloc::format!(
                "population ratio needs both groups (a=0: {zeros}, a=1: {ones})"
            )));
        }
        Ok(Self(zeros as f64 / ones as f64))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Weight of a neighbor with attribute `a` in the local sum.
    pub fn weight(self, a: u8) -> f64 {
        if a == 0 {
            -1.0
        } else {
            self.0
        }
    }
}

pub fn attr_targets(a: &[u8]) -> Vec<f64> {
    a.iter().map(|&v| f64::from(v)).collect()
}

pub fn label_targets(y: &[i8]) -> Vec<f64> {
    y.iter().map(|&v| if v > 0 { 1.0 } else { 0.0 }).collect()
}

/// Mean BCE of `m_a(f_a(x))` against the sensitive attribute.
pub fn loss_a(g: &mut Graph, f_a: &Bound, m_a: &Bound, x: &Matrix, a: &[u8], mode: &mut Mode<'_>) -> Result<Var> {
    let xv = g.constant(x.clone());
    let z = f_a.forward(g, xv, mode)?;
    let p = m_a.forward(g, z, mode)?;
    g.mean_bce(p, &attr_targets(a))
}

/// Mean BCE of `m_y(z)` against `{-1,+1}` labels.
pub fn loss_y_from_embedding(g: &mut Graph, m_y: &Bound, z: Var, y: &[i8], mode: &mut Mode<'_>) -> Result<Var> {
    let p = m_y.forward(g, z, mode)?;
    g.mean_bce(p, &label_targets(y))
}

pub fn loss_y(g: &mut Graph, f_z: &Bound, m_y: &Bound, x: &Matrix, y: &[i8], mode: &mut Mode<'_>) -> Result<Var> {
    let xv = g.constant(x.clone());
    let z = f_z.forward(g, xv, mode)?;
    loss_y_from_embedding(g, m_y, z, y, mode)
}

/// A two-group loss where either group may be missing from the batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupTerm {
    pub loss: Option<Var>,
    /// Number of group terms dropped because the group was absent.
    pub skipped: u32,
}

fn two_group_bce(
    g: &mut Graph,
    d: &Bound,
    z0: Option<Var>,
    z1: Option<Var>,
    target0: f64,
    target1: f64,
    mode: &mut Mode<'_>,
) -> Result<GroupTerm> {
    let mut loss = None;
    let mut skipped = 0;
    for (z, t) in [(z0, target0), (z1, target1)] {
        let Some(z) = z.filter(|z| g.shape(*z).0 > 0) else {
            skipped += 1;
            continue;
        };
        let p = d.forward(g, z, mode)?;
        let n = g.shape(p).0;
        let term = g.mean_bce(p, &alloc::vec![t; n])?;
        loss = Some(match loss {
            None => term,
            Some(acc) => g.add(acc, term)?,
        });
    }
    Ok(GroupTerm { loss, skipped })
}

/// Adversarial term: both groups' embeddings are scored against target 1.
pub fn loss_adv_from_embeddings(
    g: &mut Graph,
    d: &Bound,
    z0: Option<Var>,
    z1: Option<Var>,
    mode: &mut Mode<'_>,
) -> Result<GroupTerm> {
    two_group_bce(g, d, z0, z1, 1.0, 1.0, mode)
}

/// Discriminator term: group 0 against target 0, group 1 against target 1.
pub fn loss_d_from_embeddings(
    g: &mut Graph,
    d: &Bound,
    z0: Option<Var>,
    z1: Option<Var>,
    mode: &mut Mode<'_>,
) -> Result<GroupTerm> {
    two_group_bce(g, d, z0, z1, 0.0, 1.0, mode)
}

fn embed_opt(g: &mut Graph, f_z: &Bound, x: &Matrix, mode: &mut Mode<'_>) -> Result<Option<Var>> {
    if x.rows() == 0 {
        return Ok(None);
    }
    let xv = g.constant(x.clone());
    f_z.forward(g, xv, mode).map(Some)
}

/// `L_adv` on group batches `x0` (a = 0) and `x1` (a = 1). An empty batch
/// skips its term. Bind `d` untrainable so that only `f_z` receives
/// gradient.
pub fn loss_adv(
    g: &mut Graph,
    d: &Bound,
    f_z: &Bound,
    x0: &Matrix,
    x1: &Matrix,
    mode: &mut Mode<'_>,
) -> Result<GroupTerm> {
    let z0 = embed_opt(g, f_z, x0, mode)?;
    let z1 = embed_opt(g, f_z, x1, mode)?;
    loss_adv_from_embeddings(g, d, z0, z1, mode)
}

/// `L_d` on group batches. `f_z` is evaluated and then detached, so no
/// gradient reaches it whatever its binding.
pub fn loss_d(g: &mut Graph, d: &Bound, f_z: &Mlp, x0: &Matrix, x1: &Matrix, mode: &mut Mode<'_>) -> Result<GroupTerm> {
    let detached = |g: &mut Graph, x: &Matrix, mode: &mut Mode<'_>| -> Result<Option<Var>> {
        if x.rows() == 0 {
            return Ok(None);
        }
        let mut scratch = Graph::new();
        let fz = f_z.bind(&mut scratch, false);
        let xv = scratch.constant(x.clone());
        let z = fz.forward(&mut scratch, xv, mode)?;
        Ok(Some(g.constant(scratch.value(z).clone())))
    };
    let z0 = detached(g, x0, mode)?;
    let z1 = detached(g, x1, mode)?;
    loss_d_from_embeddings(g, d, z0, z1, mode)
}

/// Mean over rows of `‖dec(concat(z_a, z)) − x‖₁`.
pub fn loss_rec_from_embeddings(
    g: &mut Graph,
    dec: &Bound,
    z_a: Var,
    z: Var,
    x: Var,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    let joint = g.concat_cols(z_a, z)?;
    let recon = dec.forward(g, joint, mode)?;
    g.mean_row_l1(recon, x)
}

/// `L_rec` with a frozen attribute encoder. `f_a` runs in eval mode and
/// its output enters the graph as a constant, so gradients reach only the
/// decoder and `f_z`.
pub fn loss_rec(g: &mut Graph, dec: &Bound, f_a: &Mlp, f_z: &Bound, x: &Matrix, mode: &mut Mode<'_>) -> Result<Var> {
    let z_a = g.constant(f_a.predict(x)?);
    let xv = g.constant(x.clone());
    let z = f_z.forward(g, xv, mode)?;
    loss_rec_from_embeddings(g, dec, z_a, z, xv, mode)
}

/// Same-label nearest neighbors of every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbors {
    /// `lists[i]` holds row indices ordered by increasing distance.
    pub lists: Vec<Vec<usize>>,
    /// Total number of missing neighbors over rows with fewer than K
    /// same-label candidates.
    pub shortfall: usize,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For every row of `z`, the `k` nearest rows (Euclidean) with the same
/// label, excluding the row itself. Ties go to the lower index.
pub fn knn_same_label(z: &Matrix, y: &[i8], k: usize) -> Result<Neighbors> {
    if y.len() != z.rows() {
        return Err(Error::Shape {
            op: "knn_same_label",
            lhs: z.shape(),
            rhs: (y.len(), 1),
        });
    }
    if k == 0 {
        return Err(Error::Config("K must be >= 1".into()));
    }
    let n = z.rows();
    let mut lists = Vec::with_capacity(n);
    let mut shortfall = 0;
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        let zi = z.row(i);
        cand.extend(
            (0..n)
                .filter(|&j| j != i && y[j] == y[i])
                .map(|j| (sq_dist(zi, z.row(j)), j)),
        );
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if cand.len() > k {
            cand.select_nth_unstable_by(k - 1, order);
            cand.truncate(k);
        } else {
            shortfall += k - cand.len();
        }
        cand.sort_unstable_by(order);
        lists.push(cand.iter().map(|&(_, j)| j).collect());
    }
    Ok(Neighbors { lists, shortfall })
}

/// Result of building the local fairness term on a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTerm {
    pub loss: Var,
    pub shortfall: usize,
}

/// Local fairness loss on batch embeddings `z`.
///
/// For each label class, every row's same-label neighbors are combined as
/// `Σ_j w(a_j) z_j` with `w(0) = -1`, `w(1) = r`; the class term is the
/// mean Euclidean norm of these sums over the class's rows, and the two
/// class terms are added. The anchor row is not part of its own sum.
/// Neighbor indices are computed from the current values of `z` and held
/// fixed for the backward pass.
pub fn local_fairness_loss(
    g: &mut Graph,
    z: Var,
    y: &[i8],
    a: &[u8],
    k: usize,
    r: PopulationRatio,
) -> Result<LocalTerm> {
    let nb = knn_same_label(g.value(z), y, k)?;
    let loss = local_fairness_with_neighbors(g, z, y, a, &nb, r)?;
    Ok(LocalTerm {
        loss,
        shortfall: nb.shortfall,
    })
}

/// The local fairness loss for given neighbor lists. A label class with
/// no rows contributes 0.
pub fn local_fairness_with_neighbors(
    g: &mut Graph,
    z: Var,
    y: &[i8],
    a: &[u8],
    nb: &Neighbors,
    r: PopulationRatio,
) -> Result<Var> {
    let n = g.shape(z).0;
    if a.len() != n || y.len() != n || nb.lists.len() != n {
        return Err(Error::Shape {
            op: "local_fairness_loss",
            lhs: g.shape(z),
            rhs: (y.len().min(a.len()).min(nb.lists.len()), 1),
        });
    }
    let mut total: Option<Var> = None;
    for class in [-1i8, 1] {
        let terms: RowCombination = (0..n)
            .filter(|&i| y[i] == class)
            .map(|i| nb.lists[i].iter().map(|&j| (j, r.weight(a[j]))).collect())
            .collect();
        if terms.is_empty() {
            continue;
        }
        let sums = g.weighted_row_sum(z, terms)?;
        let norms = g.l2_norm_rows(sums);
        let class_term = g.mean(norms)?;
        total = Some(match total {
            None => class_term,
            Some(acc) => g.add(acc, class_term)?,
        });
    }
    Ok(match total {
        Some(v) => v,
        None => g.constant(Matrix::scalar(0.0)),
    })
}

/// Individual Step II terms; `None` for terms that were not built.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Components {
    pub rec: Option<Var>,
    pub adv: Option<Var>,
    pub local: Option<Var>,
    pub cls: Option<Var>,
}

/// `L_rec + λ1·L_adv + λ2·L_local + λ3·L_y` over the terms that are both
/// present and active in `w`. Returns `None` when nothing contributes.
pub fn loss_full(g: &mut Graph, c: &Components, w: &LossWeights) -> Result<Option<Var>> {
    let parts = [
        (c.rec.filter(|_| w.rec_active()), 1.0),
        (c.adv.filter(|_| w.adv_active()), w.lambda1),
        (c.local.filter(|_| w.local_active()), w.lambda2),
        (c.cls.filter(|_| w.cls_active()), w.lambda3),
    ];
    let mut total: Option<Var> = None;
    for (term, weight) in parts {
        let Some(t) = term else { continue };
        let scaled = if weight == 1.0 { t } else { g.scale(t, weight) };
        total = Some(match total {
            None => scaled,
            Some(acc) => g.add(acc, scaled)?,
        });
    }
    Ok(total)
}
