//! Acceptance checks, one test per load-bearing guarantee: estimator
//! recovery, exact saturated fits, analytic gradients, fit-index arithmetic,
//! metric reference oracles, scoring invariants, frozen prompt texts,
//! deterministic reporting, the self-comparison fixed point, and projection
//! geometry. The last test validates domain reliabilities against an external
//! response dataset and only runs when `PERSIM_REFERENCE_RESPONSES` is set.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use persim::cfa::{
    build_ffm_spec, build_tfm_spec, fit_indices, fit_ml, ml_value_and_gradient, sample_covariance,
    CfaModelSpec, CfaOptions, CovarianceInput,
};
use persim::congruence::tcc;
use persim::report::{compare_samples, report_json, CompareOptions};
use persim::scale::{
    apply_reverse_coding, bfi2, score, Coding, MissingPolicy, ResponseMatrix, ScaleSpec,
};
use persim::sim::{
    build_prompt, render_description, run_simulation, InterviewTranscript, Method, MockResponder,
    PersonaProfile, ShapeProfile, SimulationConfig, SubjectProfile, BASE_TEMPLATE,
};
use persim::stats::{
    correlation_matrix, cronbach_alpha, discriminant_mean_abs, hai, mae, pearson_r, r_squared,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; the first draw is shifted into (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn persona(id: String, seed_sentence: String) -> SubjectProfile {
    SubjectProfile::Persona(
        PersonaProfile::new(
            id,
            vec![
                seed_sentence,
                "I enjoy long walks.".into(),
                "I collect stamps.".into(),
                "I cook on weekends.".into(),
                "I read before bed.".into(),
            ],
        )
        .unwrap(),
    )
}

fn mock_sample(n: usize, seed: u64, spec: &ScaleSpec) -> ResponseMatrix {
    let profiles: Vec<SubjectProfile> = (1..=n)
        .map(|i| persona(format!("s{i:03}"), format!("I am subject number {i}.")))
        .collect();
    let cfg = SimulationConfig::new(Method::Persona);
    run_simulation(&profiles, spec, &cfg, &MockResponder::new(seed))
        .unwrap()
        .matrix
}

#[test]
fn acceptance_cfa_recovers_known_three_factor_model() {
    let per_factor = [0.8, 0.7, 0.6, 0.5];
    let (p, m) = (12, 3);
    let mut lambda_true = Vec::with_capacity(p);
    let mut factor_of = Vec::with_capacity(p);
    for f in 0..m {
        for &l in &per_factor {
            lambda_true.push(l);
            factor_of.push(f);
        }
    }
    let mut phi_true = DMatrix::from_element(m, m, 0.5);
    phi_true.fill_diagonal(1.0);
    // Unit indicator variances: error variance is 1 - lambda^2.
    let theta_true: Vec<f64> = lambda_true.iter().map(|l| 1.0 - l * l).collect();

    let phi_chol = phi_true.cholesky().expect("factor correlations are PD").l();
    let n = 5000;
    let mut rng = ChaCha8Rng::seed_from_u64(20240915);
    let mut data = DMatrix::zeros(n, p);
    for row in 0..n {
        let z = DVector::from_fn(m, |_, _| standard_normal(&mut rng));
        let f = &phi_chol * z;
        for i in 0..p {
            let e = theta_true[i].sqrt() * standard_normal(&mut rng);
            data[(row, i)] = lambda_true[i] * f[factor_of[i]] + e;
        }
    }

    let names: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    let cov = sample_covariance(&data, names.clone()).unwrap();
    let model = CfaModelSpec::new(
        names,
        vec!["F1".into(), "F2".into(), "F3".into()],
        factor_of.clone(),
        true,
    )
    .unwrap();

    let started = Instant::now();
    let fit = fit_ml(&cov, &model, &CfaOptions::default()).unwrap();
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "fit took {elapsed:?}");
    assert!(fit.converged, "warnings: {:?}", fit.warnings);
    for i in 0..p {
        let est = fit.loadings_std[(i, factor_of[i])];
        assert!(
            (est - lambda_true[i]).abs() <= 0.05,
            "loading {i}: estimated {est:.4}, true {}",
            lambda_true[i]
        );
    }
    for j in 0..m {
        for k in (j + 1)..m {
            assert!(
                (fit.phi[(j, k)] - 0.5).abs() <= 0.05,
                "phi[{j},{k}] = {:.4}",
                fit.phi[(j, k)]
            );
        }
    }
}

#[test]
fn acceptance_single_factor_triple_fit_is_saturated() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..5 {
        // A covariance of the form lambda lambda^T + diag(theta) with
        // positive theta is PD and exactly representable, so the zero-df
        // model must drive the discrepancy to the optimizer's floor.
        let lambda: Vec<f64> = (0..3).map(|_| 0.5 + rng.random::<f64>()).collect();
        let theta: Vec<f64> = (0..3).map(|_| 0.3 + 0.7 * rng.random::<f64>()).collect();
        let mut s = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                s[(i, j)] = lambda[i] * lambda[j];
            }
            s[(i, i)] += theta[i];
        }
        let names: Vec<String> = (1..=3).map(|i| format!("v{i}")).collect();
        let cov = CovarianceInput::new(s, 500, names.clone()).unwrap();
        let model = CfaModelSpec::new(names, vec!["F".into()], vec![0, 0, 0], true).unwrap();
        let fit = fit_ml(&cov, &model, &CfaOptions::default()).unwrap();
        assert_eq!(fit.df, 0, "trial {trial}");
        assert!(fit.f_ml < 1e-8, "trial {trial}: F = {:e}", fit.f_ml);
        assert!(
            fit.indices.srmr < 1e-4,
            "trial {trial}: SRMR = {:e}",
            fit.indices.srmr
        );
        assert!(fit.indices.rmsea.is_none());
        assert!(fit.indices.tli.is_none());
    }
}

#[test]
fn acceptance_analytic_gradient_matches_central_differences() {
    let scale = bfi2();
    let tfm = build_tfm_spec(&scale.domains[0], scale).unwrap();
    let ffm = build_ffm_spec(scale).unwrap();
    for model in [tfm, ffm] {
        let p = model.n_indicators();
        let m = model.n_factors();
        let n_phi = m * (m - 1) / 2;
        let n_params = 2 * p + n_phi;
        let mut rng = ChaCha8Rng::seed_from_u64(0xFACE ^ p as u64);

        // A well-conditioned positive-definite target covariance.
        let b = DMatrix::from_fn(p, p, |_, _| 0.3 * standard_normal(&mut rng));
        let s = &b * b.transpose() + DMatrix::identity(p, p) * 0.5;
        let cov = CovarianceInput::new(s, 400, model.indicator_names().to_vec()).unwrap();

        let mut checked = 0;
        let mut draws = 0;
        while checked < 10 {
            draws += 1;
            assert!(draws <= 100, "could not find 10 feasible points");
            let mut x = DVector::zeros(n_params);
            for i in 0..p {
                x[i] = 0.3 + 0.6 * rng.random::<f64>();
            }
            for i in 0..n_phi {
                x[p + i] = 0.5 * rng.random::<f64>() - 0.25;
            }
            for i in 0..p {
                x[p + n_phi + i] = 0.4_f64.ln() + rng.random::<f64>() * (1.2_f64 / 0.4).ln();
            }
            let Some((_, grad)) = ml_value_and_gradient(&model, &cov, &x) else {
                continue;
            };

            let h = 1e-5;
            let mut feasible = true;
            let mut numeric = DVector::zeros(n_params);
            for i in 0..n_params {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                match (
                    ml_value_and_gradient(&model, &cov, &xp),
                    ml_value_and_gradient(&model, &cov, &xm),
                ) {
                    (Some((fp, _)), Some((fm, _))) => numeric[i] = (fp - fm) / (2.0 * h),
                    _ => {
                        feasible = false;
                        break;
                    }
                }
            }
            if !feasible {
                continue;
            }
            for i in 0..n_params {
                let scale = grad[i].abs().max(numeric[i].abs()).max(1.0);
                assert!(
                    (grad[i] - numeric[i]).abs() <= 1e-4 * scale,
                    "{} factors, point {checked}, parameter {i}: analytic {} vs numeric {}",
                    m,
                    grad[i],
                    numeric[i]
                );
            }
            checked += 1;
        }
    }
}

#[test]
fn acceptance_fit_indices_match_hand_computed_values() {
    // S and Sigma-hat only feed SRMR; identical matrices pin it at zero so
    // the incremental and absolute indices can be checked in isolation.
    let eye = DMatrix::<f64>::identity(12, 12);
    let idx = fit_indices(100.0, 51, 2000.0, 66, 357, &eye, &eye).unwrap();
    let rmsea = idx.rmsea.unwrap();
    let cfi = idx.cfi.unwrap();
    let tli = idx.tli.unwrap();
    assert!((rmsea - 0.0520).abs() <= 1e-4, "rmsea = {rmsea}");
    assert!((cfi - 0.9747).abs() <= 1e-4, "cfi = {cfi}");
    // Hand-computed: sqrt((100 - 51) / (51 * 356)).
    assert!((rmsea - 0.05195028721696863).abs() <= 1e-12);
    // Hand-computed: 1 - (100 - 51) / (2000 - 66).
    assert!((cfi - 0.9746639089968976).abs() <= 1e-12);
    // Hand-computed: (2000/66 - 100/51) / (2000/66 - 1).
    assert!((tli - 0.9672121175253969).abs() <= 1e-12, "tli = {tli}");
    assert_eq!(idx.srmr, 0.0);
}

fn ref_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (n - 1.0);
    let sx = (x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>() / (n - 1.0)).sqrt();
    let sy = (y.iter().map(|b| (b - my) * (b - my)).sum::<f64>() / (n - 1.0)).sqrt();
    cov / (sx * sy)
}

fn ref_alpha(grid: &DMatrix<f64>) -> f64 {
    let (n, k) = (grid.nrows(), grid.ncols());
    let nf = n as f64;
    let variance = |values: &[f64]| {
        let mean = values.iter().sum::<f64>() / nf;
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0)
    };
    let item_sum: f64 = (0..k)
        .map(|j| variance(&grid.column(j).iter().copied().collect::<Vec<_>>()))
        .sum();
    let totals: Vec<f64> = (0..n).map(|i| grid.row(i).iter().sum()).collect();
    let kf = k as f64;
    kf / (kf - 1.0) * (1.0 - item_sum / variance(&totals))
}

#[test]
fn acceptance_metrics_match_reference_implementations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let tol = 1e-10;
    for round in 0..100 {
        let n = 5 + (rng.random::<u64>() % 36) as usize;

        // Paired vectors with a shared component so correlations are
        // non-degenerate but not extreme.
        let base: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let x: Vec<f64> = base
            .iter()
            .map(|b| b + 0.8 * standard_normal(&mut rng))
            .collect();
        let y: Vec<f64> = base
            .iter()
            .map(|b| 0.5 * b + standard_normal(&mut rng))
            .collect();

        let r = pearson_r(&x, &y).unwrap();
        assert!((r - ref_pearson(&x, &y)).abs() <= tol, "pearson, round {round}");

        let m = mae(&x, &y).unwrap();
        let ref_mae = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
        assert!((m - ref_mae).abs() <= tol, "mae, round {round}");

        // The alignment index is defined as the correlation of two sigma
        // profiles; on any pair of vectors it must equal pearson bit for bit.
        let sx: Vec<f64> = x.iter().map(|v| v.abs() + 0.1).collect();
        let sy: Vec<f64> = y.iter().map(|v| v.abs() + 0.1).collect();
        let h = hai(&sx, &sy).unwrap();
        assert_eq!(h.to_bits(), pearson_r(&sx, &sy).unwrap().to_bits());
        assert!((h - ref_pearson(&sx, &sy)).abs() <= tol, "hai, round {round}");

        // Simple regression: the determination coefficient equals the
        // squared correlation, an independent route to the same number.
        let r2 = r_squared(&x, &y).unwrap();
        assert!((r2 - ref_pearson(&x, &y).powi(2)).abs() <= tol, "r^2, round {round}");

        let k = 3 + (rng.random::<u64>() % 6) as usize;
        let common: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let grid = DMatrix::from_fn(n, k, |i, _| common[i] + 0.7 * standard_normal(&mut rng));
        let a = cronbach_alpha(&grid).unwrap();
        assert!((a - ref_alpha(&grid)).abs() <= tol, "alpha, round {round}");

        let la: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
        let lb: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
        let t = tcc(&la, &lb).unwrap();
        let dot: f64 = la.iter().zip(&lb).map(|(a, b)| a * b).sum();
        let na = la.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = lb.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((t - dot / (na * nb)).abs() <= tol, "tcc, round {round}");

        let dims = 3 + (rng.random::<u64>() % 3) as usize;
        let score_grid =
            DMatrix::from_fn(n.max(8), dims, |i, _| common[i % n] + standard_normal(&mut rng));
        let corr = correlation_matrix(&score_grid).unwrap();
        let d = discriminant_mean_abs(&corr).unwrap();
        let mut acc = 0.0;
        let mut count = 0;
        for i in 0..dims {
            for j in (i + 1)..dims {
                acc += corr[(i, j)].abs();
                count += 1;
            }
        }
        assert!((d - acc / count as f64).abs() <= tol, "discriminant, round {round}");
    }
}

#[test]
fn acceptance_domain_row_mean_absolute_correlation() {
    let row = [0.17, 0.35, -0.45, 0.22, 0.33, -0.36, 0.20, -0.49, 0.09, -0.11];
    let mut corr = DMatrix::identity(5, 5);
    let mut values = row.iter();
    for i in 0..5 {
        for j in (i + 1)..5 {
            let v = *values.next().unwrap();
            corr[(i, j)] = v;
            corr[(j, i)] = v;
        }
    }
    let mean_abs = discriminant_mean_abs(&corr).unwrap();
    assert!((mean_abs - 0.277).abs() < 1e-12, "mean abs = {mean_abs}");
    assert_eq!(format!("{mean_abs:.2}"), "0.28");
}

#[test]
fn acceptance_reverse_coding_involution_and_score_identities() {
    let spec = bfi2();
    assert_eq!(spec.items.len(), 60);

    // Recoding is an involution on every item at every admissible value.
    for item in &spec.items {
        for raw in 1..=5 {
            let v = f64::from(raw);
            let once = if item.reverse { spec.likert.reverse(v).unwrap() } else { v };
            let twice = if item.reverse { spec.likert.reverse(once).unwrap() } else { once };
            assert_eq!(twice, v, "item {}", item.id);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 1000;
    let ids: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
    let values: Vec<Option<f64>> = (0..n * 60)
        .map(|_| Some(f64::from(1 + (rng.random::<u64>() % 5) as i32)))
        .collect();
    let raw = ResponseMatrix::new(
        ids.clone(),
        spec.item_ids(),
        values.clone(),
        Coding::Raw,
        &spec.likert,
    )
    .unwrap();

    // Applying the recode twice at matrix level restores the original.
    let coded = apply_reverse_coding(&raw, spec).unwrap();
    let coded_values: Vec<Option<f64>> = (0..n)
        .flat_map(|r| (0..60).map(move |c| (r, c)))
        .map(|(r, c)| coded.value(r, c))
        .collect();
    let relabeled =
        ResponseMatrix::new(ids, spec.item_ids(), coded_values, Coding::Raw, &spec.likert)
            .unwrap();
    let restored = apply_reverse_coding(&relabeled, spec).unwrap();
    for r in 0..n {
        for c in 0..60 {
            assert_eq!(restored.value(r, c), raw.value(r, c));
        }
    }

    // Domain scores equal the mean of their facet scores and of their items.
    let scored = score(&coded, spec, MissingPolicy::ListwiseDelete).unwrap();
    assert_eq!(scored.subject_ids.len(), n);
    for (dj, domain) in spec.domains.iter().enumerate() {
        let facet_cols: Vec<usize> = domain
            .facet_names
            .iter()
            .map(|name| scored.facet_names.iter().position(|f| f == name).unwrap())
            .collect();
        let item_cols: Vec<usize> = domain
            .item_ids
            .iter()
            .map(|id| {
                scored
                    .item_labels
                    .iter()
                    .position(|l| l == &format!("Item{id}"))
                    .unwrap()
            })
            .collect();
        assert_eq!(item_cols.len(), 12);
        for i in 0..n {
            let facet_mean: f64 = facet_cols
                .iter()
                .map(|&fc| scored.facet_scores[(i, fc)])
                .sum::<f64>()
                / facet_cols.len() as f64;
            let item_mean: f64 = item_cols
                .iter()
                .map(|&ic| scored.item_scores[(i, ic)])
                .sum::<f64>()
                / item_cols.len() as f64;
            let d = scored.domain_scores[(i, dj)];
            assert!(
                (d - facet_mean).abs() <= 1e-12,
                "domain {} subject {i}: {d} vs facet mean {facet_mean}",
                domain.name
            );
            assert!(
                (d - item_mean).abs() <= 1e-12,
                "domain {} subject {i}: {d} vs item mean {item_mean}",
                domain.name
            );
        }
    }
}

#[test]
fn acceptance_prompt_renderings_match_frozen_texts() {
    assert_eq!(
        BASE_TEMPLATE,
        "For the following task, respond in a way that matches:"
    );

    let persona_profile = SubjectProfile::Persona(
        PersonaProfile::new(
            "p",
            vec![
                "I wear a lot of leather.".into(),
                "I have boots I always wear.".into(),
                "I sleep in late during the day.".into(),
                "I listen to metal music.".into(),
                "I have black spiky hair.".into(),
            ],
        )
        .unwrap(),
    );
    assert_eq!(
        render_description(&persona_profile).unwrap(),
        "I wear a lot of leather. I have boots I always wear. I sleep in late during the day. \
I listen to metal music. I have black spiky hair."
    );

    let shape_high = SubjectProfile::Shape(
        ShapeProfile::new(
            "s",
            vec![
                ("unfriendly".into(), "friendly".into()),
                ("unenergetic".into(), "energetic".into()),
                ("timid".into(), "assertive".into()),
                ("unadventurous".into(), "bold".into()),
                ("inactive".into(), "active".into()),
            ],
            9,
        )
        .unwrap(),
    );
    assert_eq!(
        render_description(&shape_high).unwrap(),
        "You are extremely friendly, extremely energetic, extremely assertive, extremely bold, \
and extremely active."
    );

    let shape_mid = SubjectProfile::Shape(
        ShapeProfile::new(
            "s",
            vec![
                ("quiet".into(), "talkative".into()),
                ("unenergetic".into(), "energetic".into()),
                ("timid".into(), "assertive".into()),
                ("unadventurous".into(), "bold".into()),
                ("inactive".into(), "active".into()),
            ],
            5,
        )
        .unwrap(),
    );
    assert!(render_description(&shape_mid)
        .unwrap()
        .contains("neither quiet nor talkative"));

    let answers: Vec<String> = (1..=32).map(|i| format!("answer {i}")).collect();
    let transcript = InterviewTranscript::from_answers("golden", answers).unwrap();
    let d = render_description(&SubjectProfile::Interview(transcript)).unwrap();
    let spec = bfi2();
    let prompt = build_prompt(&d, spec.item(1).unwrap(), &spec.likert);
    assert!(prompt.text.starts_with(BASE_TEMPLATE));
    assert_eq!(prompt.text, include_str!("golden/psi_prompt_item1.txt"));
}

#[test]
fn acceptance_mock_pipeline_report_is_deterministic() {
    let started = Instant::now();
    let spec = bfi2();
    let human = mock_sample(50, 101, spec);
    let simulated = mock_sample(50, 202, spec);
    assert_eq!(human.n_subjects(), 50);
    assert_eq!(human.n_items(), 60);

    let mut options = CompareOptions::default();
    options.seeds = BTreeMap::from([("reference".into(), 101), ("simulation".into(), 202)]);
    let first = compare_samples(&human, &simulated, spec, &options).unwrap();
    let second = compare_samples(&human, &simulated, spec, &options).unwrap();
    assert_eq!(report_json(&first).unwrap(), report_json(&second).unwrap());

    for level in &first.descriptives {
        assert!(
            level.hai.as_f64().is_some(),
            "{} alignment: {:?}",
            level.level,
            level.hai
        );
    }
    assert!(first.similarity.paired);
    for row in &first.similarity.per_domain {
        assert!(row.r.as_f64().is_some(), "similarity {}: {:?}", row.domain, row.r);
    }
    for entry in &first.structural {
        assert!(
            entry.congruence_error.is_none(),
            "model {}: {:?}",
            entry.model,
            entry.congruence_error
        );
        for factor in &entry.congruence {
            assert!(
                factor.tcc.as_f64().is_some(),
                "model {} factor {}: {:?}",
                entry.model,
                factor.factor,
                factor.tcc
            );
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "pipeline took {elapsed:?}");
}

#[test]
fn acceptance_self_comparison_is_a_fixed_point() {
    let spec = bfi2();
    let sample = mock_sample(40, 7, spec);
    let report = compare_samples(&sample, &sample, spec, &CompareOptions::default()).unwrap();

    for level in &report.descriptives {
        assert_eq!(level.mu_mae.as_f64(), Some(0.0), "{} mean error", level.level);
        assert_eq!(level.sigma_mae.as_f64(), Some(0.0), "{} sigma error", level.level);
        assert_eq!(level.hai.as_f64(), Some(1.0), "{} alignment", level.level);
    }
    for entry in &report.structural {
        assert!(entry.congruence_error.is_none(), "model {}", entry.model);
        for factor in &entry.congruence {
            assert_eq!(
                factor.tcc.as_f64(),
                Some(1.0),
                "model {} factor {}",
                entry.model,
                factor.factor
            );
            assert_eq!(
                factor.loading_mae.as_f64(),
                Some(0.0),
                "model {} factor {}",
                entry.model,
                factor.factor
            );
        }
    }
}

#[test]
fn acceptance_pca_basis_properties() {
    // Two dominant latent directions plus noise give a well-separated
    // spectrum.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (n, p) = (300, 15);
    let w1: Vec<f64> = (0..p).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let w2: Vec<f64> = (0..p).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let mut data = DMatrix::zeros(n, p);
    for i in 0..n {
        let a = 2.0 * standard_normal(&mut rng);
        let b = standard_normal(&mut rng);
        for j in 0..p {
            data[(i, j)] = a * w1[j] + b * w2[j] + 0.3 * standard_normal(&mut rng);
        }
    }

    let basis = persim::pca::fit_pca2(&data).unwrap();
    let c1 = basis.components.row(0);
    let c2 = basis.components.row(1);
    assert!((c1.dot(&c1) - 1.0).abs() <= 1e-10);
    assert!((c2.dot(&c2) - 1.0).abs() <= 1e-10);
    assert!(c1.dot(&c2).abs() <= 1e-10);
    assert!(basis.eigenvalues[0] >= basis.eigenvalues[1]);

    let projection = persim::pca::project(&basis, &data).unwrap();
    let nf = n as f64;
    for dim in 0..2 {
        let col = projection.coords.column(dim);
        let mean = col.sum() / nf;
        assert!(mean.abs() < 1e-9, "dim {dim} mean = {mean:e}");
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
        assert!(
            (var - basis.eigenvalues[dim]).abs() <= 1e-8,
            "dim {dim}: variance {var} vs eigenvalue {}",
            basis.eigenvalues[dim]
        );
    }
    let var1 = projection.coords.column(0).iter().map(|v| v * v).sum::<f64>();
    let var2 = projection.coords.column(1).iter().map(|v| v * v).sum::<f64>();
    assert!(var1 >= var2);
}

#[test]
fn acceptance_reference_dataset_domain_alphas_when_configured() {
    // Point PERSIM_REFERENCE_RESPONSES at a CSV of per-item responses
    // (optionally PERSIM_REFERENCE_CODING=reversed when the file is already
    // recoded) to validate domain reliabilities against published values.
    let Ok(path) = std::env::var("PERSIM_REFERENCE_RESPONSES") else {
        eprintln!(
            "SKIP: PERSIM_REFERENCE_RESPONSES not set; reference-dataset reliability \
check not run"
        );
        return;
    };
    let spec = bfi2();
    let declared = match std::env::var("PERSIM_REFERENCE_CODING").as_deref() {
        Ok("reversed") => Coding::ReverseApplied,
        _ => Coding::Raw,
    };
    let matrix = persim::io::load_responses_path(path.as_ref(), spec, declared).unwrap();
    let coded = match matrix.coding() {
        Coding::Raw => apply_reverse_coding(&matrix, spec).unwrap(),
        Coding::ReverseApplied => matrix,
    };
    let scored = score(&coded, spec, MissingPolicy::ListwiseDelete).unwrap();

    let expected = [
        ("Extraversion", 0.87),
        ("Agreeableness", 0.85),
        ("Conscientiousness", 0.90),
        ("Neuroticism", 0.94),
        ("Openness", 0.89),
    ];
    for (name, want) in expected {
        let domain = spec.domain(name).unwrap();
        let cols: Vec<usize> = domain
            .item_ids
            .iter()
            .map(|id| {
                scored
                    .item_labels
                    .iter()
                    .position(|l| l == &format!("Item{id}"))
                    .unwrap()
            })
            .collect();
        let grid = DMatrix::from_fn(scored.item_scores.nrows(), cols.len(), |r, c| {
            scored.item_scores[(r, cols[c])]
        });
        let alpha = cronbach_alpha(&grid).unwrap();
        assert!(
            (alpha - want).abs() <= 0.01,
            "{name}: alpha = {alpha:.4}, expected {want} +/- 0.01"
        );
    }
}
