use serde::Serialize;

use super::{DiscreteJointDist, PiFunction};
use crate::error::{Error, Result};

/// `Pr(i ∈ s | z) = Σ_y π(y, z) f_p(y | z)` for every z support point.
pub fn selection_propensity(fp: &DiscreteJointDist, pi: &PiFunction) -> Result<Vec<f64>> {
    pi.check_against(fp)?;
    (0..fp.nz())
        .map(|z| {
            let cond = fp.conditional(z).ok_or(Error::DegenerateDesign { z_index: z })?;
            Ok(cond.iter().enumerate().map(|(y, c)| pi.get(y, z) * c).sum())
        })
        .collect()
}

/// Sample distribution `f_s(y|z) = π(y,z) f_p(y|z) / Pr(i ∈ s | z)`, with the
/// z marginal reweighted by `Pr(i ∈ s | z)`.
pub fn exact_sample_pdf(fp: &DiscreteJointDist, pi: &PiFunction) -> Result<DiscreteJointDist> {
    pi.check_against(fp)?;
    let fz = fp.z_marginal();
    let mut cond = Vec::with_capacity(fp.nz());
    let mut mass = Vec::with_capacity(fp.nz());
    for z in 0..fp.nz() {
        let cp = fp.conditional(z).ok_or(Error::DegenerateDesign { z_index: z })?;
        let num: Vec<f64> = cp.iter().enumerate().map(|(y, c)| pi.get(y, z) * c).collect();
        let prs: f64 = num.iter().sum();
        if !(prs > 0.0) {
            return Err(Error::DegenerateDesign { z_index: z });
        }
        cond.push(num.iter().map(|v| v / prs).collect());
        mass.push(fz[z] * prs);
    }
    Ok(DiscreteJointDist::from_conditionals(fp, &cond, &mass))
}

/// Inverts the sample distribution through the weight expectations:
/// `f_p(y|z) = E_s(w|y,z) f_s(y|z) / E_s(w|z)` with `w = 1/π` and the z
/// marginal recovered as `f_s(z) E_s(w|z)`.
pub fn recover_population_pdf(fs: &DiscreteJointDist, pi: &PiFunction) -> Result<DiscreteJointDist> {
    pi.check_against(fs)?;
    let fsz = fs.z_marginal();
    let mut cond = Vec::with_capacity(fs.nz());
    let mut mass = Vec::with_capacity(fs.nz());
    for z in 0..fs.nz() {
        let cs = fs.conditional(z).ok_or(Error::UnrecoverableSupport { z_index: z })?;
        let num: Vec<f64> = cs.iter().enumerate().map(|(y, c)| c / pi.get(y, z)).collect();
        let esw_z: f64 = num.iter().sum();
        cond.push(num.iter().map(|v| v / esw_z).collect());
        mass.push(fsz[z] * esw_z);
    }
    Ok(DiscreteJointDist::from_conditionals(fs, &cond, &mass))
}

/// Sample-complement distribution computed two independent ways.
///
/// The first element uses `Pr(i ∉ s | y, z) f_p(y|z) / Pr(i ∉ s | z)`; the
/// second uses only the sample distribution and the weights,
/// `E_s[w - 1 | y, z] f_s(y|z) / E_s[w - 1 | z]`.
pub fn exact_complement_pdf(
    fp: &DiscreteJointDist,
    pi: &PiFunction,
) -> Result<(DiscreteJointDist, DiscreteJointDist)> {
    pi.check_against(fp)?;

    let fz = fp.z_marginal();
    let mut cond = Vec::with_capacity(fp.nz());
    let mut mass = Vec::with_capacity(fp.nz());
    for z in 0..fp.nz() {
        let cp = fp.conditional(z).ok_or(Error::DegenerateDesign { z_index: z })?;
        let num: Vec<f64> = cp.iter().enumerate().map(|(y, c)| (1.0 - pi.get(y, z)) * c).collect();
        let prc: f64 = num.iter().sum();
        if !(prc > 0.0) {
            return Err(Error::EmptyComplement { z_index: z });
        }
        cond.push(num.iter().map(|v| v / prc).collect());
        mass.push(fz[z] * prc);
    }
    let by_definition = DiscreteJointDist::from_conditionals(fp, &cond, &mass);

    let fs = exact_sample_pdf(fp, pi)?;
    let fsz = fs.z_marginal();
    let mut cond = Vec::with_capacity(fs.nz());
    let mut mass = Vec::with_capacity(fs.nz());
    for z in 0..fs.nz() {
        let cs = fs.conditional(z).ok_or(Error::DegenerateDesign { z_index: z })?;
        let num: Vec<f64> = cs.iter().enumerate().map(|(y, c)| (1.0 / pi.get(y, z) - 1.0) * c).collect();
        let e_wm1: f64 = num.iter().sum();
        if !(e_wm1 > 0.0) {
            return Err(Error::EmptyComplement { z_index: z });
        }
        cond.push(num.iter().map(|v| v / e_wm1).collect());
        mass.push(fsz[z] * e_wm1);
    }
    let by_weights = DiscreteJointDist::from_conditionals(&fs, &cond, &mass);

    Ok((by_definition, by_weights))
}

/// True iff `max |π(y,z) - Pr(i ∈ s | z)| <= tol` over the grid.
pub fn ignorability_check(fp: &DiscreteJointDist, pi: &PiFunction, tol: f64) -> Result<bool> {
    let prs = selection_propensity(fp, pi)?;
    let worst = (0..fp.nz())
        .flat_map(|z| (0..fp.ny()).map(move |y| (y, z)))
        .map(|(y, z)| (pi.get(y, z) - prs[z]).abs())
        .fold(0.0, f64::max);
    Ok(worst <= tol)
}

/// Residuals of the exact identities for one `(f_p, π)` instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `|Σ f_s - 1|`.
    pub normalization: f64,
    /// Max elementwise `|recover(f_s) - f_p|`.
    pub round_trip: f64,
    /// Max elementwise gap between the two complement forms.
    pub dual_form: f64,
    /// Max `|Pr(s|z) f_s(y|z) + Pr(∉s|z) f_c(y|z) - f_p(y|z)|`.
    pub mixture: f64,
    /// Max `|f_s(y|z) - f_p(y|z)|`.
    pub sample_vs_population: f64,
    /// Max `|f_c(y|z) - f_p(y|z)|`.
    pub complement_vs_population: f64,
    pub ignorable: bool,
    pub sample_pdf: DiscreteJointDist,
    pub complement_pdf: DiscreteJointDist,
    pub selection_propensity: Vec<f64>,
}

impl IdentityReport {
    /// Largest of the identity residuals that must vanish for every instance.
    pub fn max_residual(&self) -> f64 {
        self.normalization.max(self.round_trip).max(self.dual_form).max(self.mixture)
    }
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs every exact identity on one instance. `tol` is the ignorability tolerance.
pub fn identity_residuals(fp: &DiscreteJointDist, pi: &PiFunction, tol: f64) -> Result<IdentityReport> {
    fp.validate()?;
    let fs = exact_sample_pdf(fp, pi)?;
    let back = recover_population_pdf(&fs, pi)?;
    let (fc_def, fc_w) = exact_complement_pdf(fp, pi)?;
    let prs = selection_propensity(fp, pi)?;

    let cp = fp.conditional_table();
    let cs = fs.conditional_table();
    let cc = fc_def.conditional_table();
    let mut mixture: f64 = 0.0;
    for z in 0..fp.nz() {
        for y in 0..fp.ny() {
            let mix = prs[z] * cs[y][z] + (1.0 - prs[z]) * cc[y][z];
            mixture = mixture.max((mix - cp[y][z]).abs());
        }
    }

    Ok(IdentityReport {
        normalization: (fs.total() - 1.0).abs(),
        round_trip: max_abs_diff(&back.p, &fp.p),
        dual_form: max_abs_diff(&fc_def.p, &fc_w.p),
        mixture,
        sample_vs_population: max_abs_diff(&cs, &cp),
        complement_vs_population: max_abs_diff(&cc, &cp),
        ignorable: ignorability_check(fp, pi, tol)?,
        sample_pdf: fs,
        complement_pdf: fc_def,
        selection_propensity: prs,
    })
}
