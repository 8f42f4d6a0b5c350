use super::{BaselineConfig, BaselineResult};
use crate::data::{Dataset, LabeledResample, SplitPlan};
use crate::metrics::{macro_f1, probe_drop};
use crate::ssl::{run_ssl, AcceptancePolicy, SslData};
use crate::Result;

/// Pseudo-labeling on the raw feature space with a constant threshold.
pub fn run_self_training(
    ds: &Dataset,
    plan: &SplitPlan,
    rs: &LabeledResample,
    cfg: &BaselineConfig,
) -> Result<BaselineResult> {
    let views = vec![ds.features.clone()];
    let data = SslData { views: &views, labels: &ds.labels, n_classes: ds.n_classes };
    let policy = AcceptancePolicy::fixed(cfg.tau_fixed, cfg.max_iters, cfg.learner);
    let out = run_ssl(&data, &rs.l0_idx, &rs.u0_idx, &plan.probe_idx, &policy)?;
    let score = |rows: &[usize]| -> Result<_> {
        macro_f1(&ds.labels_of(rows), &out.predict_rows(&views, rows)?, ds.n_classes)
    };
    Ok(BaselineResult {
        test: score(&plan.test_idx)?,
        val_macro_f1: score(&plan.val_idx)?.macro_f1,
        probe_drop: Some(probe_drop(out.probe_before, out.probe_after)),
        pseudo_added: out.pseudo_added,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::run_lr_ref;
    use crate::data::{make_split, resample_labeled, two_gaussians, TwoGaussians};

    fn fixture(seed: u64, lf: f64) -> (Dataset, SplitPlan) {
        let ds = two_gaussians(&TwoGaussians { n: 400, shift: 1.5, ..TwoGaussians::default() }).unwrap();
        let plan = make_split(&ds, lf, seed).unwrap();
        (ds, plan)
    }

    #[test]
    fn unreachable_threshold_equals_supervised() {
        let (ds, plan) = fixture(3, 0.05);
        let rs = resample_labeled(&plan, &ds, 0);
        let cfg = BaselineConfig { tau_fixed: 1.01, ..BaselineConfig::default() };
        let st = run_self_training(&ds, &plan, &rs, &cfg).unwrap();
        let lr = run_lr_ref(&ds, &plan, &rs, &cfg).unwrap();
        assert_eq!(st.pseudo_added, 0);
        assert_eq!(st.test, lr.test);
    }

    #[test]
    fn not_worse_than_supervised_on_blobs() {
        let cfg = BaselineConfig::default();
        let mut st = Vec::new();
        let mut lr = Vec::new();
        for seed in 0..10 {
            let (ds, plan) = fixture(seed, 0.05);
            let rs = resample_labeled(&plan, &ds, 0);
            st.push(run_self_training(&ds, &plan, &rs, &cfg).unwrap().test.macro_f1);
            lr.push(run_lr_ref(&ds, &plan, &rs, &cfg).unwrap().test.macro_f1);
        }
        let m = crate::metrics::median;
        assert!(m(&st) >= m(&lr) - 0.02, "st {} lr {}", m(&st), m(&lr));
    }
}
