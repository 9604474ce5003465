use sarcolor_autodiff::{Graph, Scalar, Var};

use crate::error::Result;

/// Terms of the generator objective, kept apart for traces and ablations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorLoss {
    pub total: Var,
    pub adversarial: Var,
    pub l1: Var,
}

/// Non-saturating adversarial term plus `alpha`-weighted mean absolute error. Either term
/// can be switched off for the loss ablation.
pub fn loss_g_terms<T: Scalar>(
    g: &mut Graph<T>,
    logits_fake: Var,
    pred: Var,
    gt: Var,
    alpha: T,
    use_adversarial: bool,
    use_l1: bool,
) -> Result<GeneratorLoss> {
    let adversarial = g.bce_with_logits(logits_fake, T::one());
    let l1 = g.l1_loss(pred, gt)?;
    let weighted = g.scale(l1, if use_l1 { alpha } else { T::zero() });
    let adv = g.scale(adversarial, if use_adversarial { T::one() } else { T::zero() });
    let total = g.add(adv, weighted)?;
    Ok(GeneratorLoss { total, adversarial, l1 })
}

pub fn loss_g<T: Scalar>(g: &mut Graph<T>, logits_fake: Var, pred: Var, gt: Var, alpha: T) -> Result<Var> {
    Ok(loss_g_terms(g, logits_fake, pred, gt, alpha, true, true)?.total)
}

/// `beta · [BCE(fake, 0) + BCE(real, 1)]`, each a mean over its logit map.
pub fn loss_d<T: Scalar>(g: &mut Graph<T>, logits_fake: Var, logits_real: Var, beta: T) -> Result<Var> {
    let fake = g.bce_with_logits(logits_fake, T::zero());
    let real = g.bce_with_logits(logits_real, T::one());
    let sum = g.add(fake, real)?;
    Ok(g.scale(sum, beta))
}
