//! Acceptance gate: one check per shipping criterion, each printing a
//! single pass/fail line (run with `--nocapture` to see the lines on
//! success; they are always shown on failure).
//!
//! The suite is deterministic: every stochastic step draws from a seed
//! pinned in this file, so reruns reproduce the same numbers bit for bit.

mod common;

use itan_core::attention::{
    spatial_encode, temporal_encode, MultiHeadParams, PosMode, PositionalEncoder,
};
use itan_core::bench::{
    analytic_match_cost, census_match_cost, measure_scaling, CostModel, MatchMethod, StageKind,
};
use itan_core::checkpoint::Checkpoint;
use itan_core::data::{
    default_synthetic_spec, draw_motifs, pair_seed, read_feature_file, synthesize_video,
    synthetic_provider, video_seed, write_feature_file, SyntheticSpec,
};
use itan_core::episodes::sample_episode;
use itan_core::gradcheck::{battery, DEFAULT_TOL};
use itan_core::metrics::{cosine, dtw_similarity, frame_similarity, mean_pooled_similarity};
use itan_core::model::{
    ci95_half_width, evaluate, full_loss_grad_check, train_loop, EpisodeShape, EvalConfig,
    ItanModel, LossMode, ModelConfig, SgdMomentum, Toggles,
};
use itan_core::rng::{derive_seed, Rng};
use itan_core::tape::{ParamSet, Tape};
use itan_core::tensor::{FeatureMap, FrameSequence, NdArray, Precision};
use std::time::Instant;

/// Criterion 1: statement of scope. The reference-scale accuracies
/// (39.8%/53.7% on SthV2-small, 49.2%/62.3% on SthV2-full, 73.6%/84.3% on
/// Kinetics) depend on an ImageNet-pretrained ResNet-50 backbone and the
/// full video datasets; neither exists at desk scale, so absolute numbers
/// are out of reach here by design. Criteria 2-9 substitute property
/// checks that pin down the mechanisms instead.
fn criterion_1() -> (bool, String) {
    (
        true,
        "non-reproducibility: reference-scale accuracies (SthV2 39.8/53.7 and 49.2/62.3, \
         Kinetics 73.6/84.3) require an ImageNet-pretrained ResNet-50 and the full datasets; \
         the property suites of criteria 2-9 substitute"
            .into(),
    )
}

/// Criterion 2: finite differences agree with the tape for every primitive
/// and every composed block (64-bit, < 1e-4 max relative error, < 1 min).
fn criterion_2() -> (bool, String) {
    let t0 = Instant::now();
    let mut reports = battery(2024).unwrap();
    reports.push(full_loss_grad_check(2024).unwrap());
    let worst = reports
        .iter()
        .map(|r| r.max_rel_error)
        .fold(0.0f64, f64::max);
    let all_pass = reports.iter().all(|r| r.passes());
    let el = t0.elapsed().as_secs_f64();
    (
        all_pass && el < 60.0,
        format!(
            "gradient integrity: {} checks pass, worst rel err {worst:.2e} (tol {DEFAULT_TOL:.0e}), {el:.1}s (< 60s)",
            reports.len()
        ),
    )
}

/// Criterion 3: on the twin-class dataset (4 pairs, L=4, n_t=8, sigma=0.05,
/// jitter on), after 2,000 episodes of 5-way 1-shot training the full model
/// beats the mean-pooled/no-temporal ablation by >= 15 points and the
/// temporal-relation-only ablation lands strictly between them.
///
/// Pinned configuration (dataset seed 1, run seed 3): 100 exemplars per
/// class (few enough exemplars let the order-blind baseline memorize the
/// finite sample instead of sitting at its twin-blind ceiling), learnable
/// positional encoding, lr 0.02, momentum 0.9, tau 10, beta 1.
fn criterion_3() -> (bool, String) {
    const RUN_SEED: u64 = 3;
    let t0 = Instant::now();
    let mut spec = default_synthetic_spec(1);
    spec.samples_per_class = 100;
    let (manifest, provider) = synthetic_provider::<f32>(&spec, Precision::F32).unwrap();
    let pool = manifest.class_ids();

    let train_and_eval = |toggles: Toggles| -> f64 {
        let cfg = ModelConfig {
            pos_mode: PosMode::Learnable,
            toggles,
            ..ModelConfig::default()
        };
        let mut set = ParamSet::new();
        let model =
            ItanModel::<f32>::init(manifest.dims, cfg, pool.clone(), RUN_SEED, &mut set).unwrap();
        let mut opt = SgdMomentum::new(0.02, 0.9);
        let mut rng = Rng::new(derive_seed(RUN_SEED, "train"));
        train_loop(
            &model,
            &mut set,
            &mut opt,
            &manifest,
            &provider,
            &pool,
            EpisodeShape {
                way: 5,
                shot: 1,
                queries_per_class: 3,
            },
            2000,
            &|_| LossMode::Joint { beta: 1.0 },
            10.0,
            &mut rng,
            0,
        )
        .unwrap();
        let ec = EvalConfig {
            runs: 5,
            episodes_per_run: 100,
            way: 5,
            shot: 1,
            queries_per_class: 3,
            metric: None,
        };
        evaluate(&model, &set, &manifest, &provider, &pool, &ec, RUN_SEED)
            .unwrap()
            .mean
    };

    let base = train_and_eval(Toggles {
        temporal_on: false,
        pos_on: false,
        framewise_on: false,
        ..Toggles::default()
    });
    let mid = train_and_eval(Toggles {
        framewise_on: false,
        ..Toggles::default()
    });
    let full = train_and_eval(Toggles::default());
    let el = t0.elapsed().as_secs_f64();
    let ok = full >= base + 0.15 && base < mid && mid < full && el < 600.0;
    (
        ok,
        format!(
            "implicit-alignment advantage: mean-pooled/no-temporal {base:.4} < temporal-relation-only {mid:.4} < full {full:.4}, gap {:.1} pts (>= 15), {el:.0}s (< 600s)",
            (full - base) * 100.0
        ),
    )
}

/// Criterion 4: noiseless jitter-free twins are bitwise indistinguishable
/// to the mean-pooled metric (exactly 1.0) yet clearly distinguishable
/// frame-wise (< 0.9).
fn criterion_4() -> (bool, String) {
    let spec = SyntheticSpec {
        noise_sigma: 0.0,
        temporal_jitter: false,
        spatial_jitter: false,
        ..default_synthetic_spec(1)
    };
    let mut ok = true;
    let mut worst_fw = f64::MIN;
    for pair in 0..spec.num_class_pairs {
        let motifs = draw_motifs(
            spec.n_c,
            spec.motifs_per_class,
            &mut Rng::new(pair_seed(spec.seed, pair)),
        );
        let fwd = synthesize_video(
            &spec,
            &motifs,
            false,
            video_seed(spec.seed, &format!("acc4/p{pair}/fwd")),
        )
        .unwrap();
        let rev = synthesize_video(
            &spec,
            &motifs,
            true,
            video_seed(spec.seed, &format!("acc4/p{pair}/rev")),
        )
        .unwrap();
        let sa = common::pooled_sequence(&fwd);
        let sb = common::pooled_sequence(&rev);
        let mp = mean_pooled_similarity(&sa, &sb).unwrap();
        let fw = frame_similarity(&sa, &sb).unwrap();
        ok &= mp == 1.0 && fw < 0.9;
        worst_fw = worst_fw.max(fw);
    }
    (
        ok,
        format!(
            "twin oracle: mean-pooled similarity exactly 1.0 on all {} pairs, frame-wise max {worst_fw:.3} (< 0.9)",
            spec.num_class_pairs
        ),
    )
}

/// Criterion 5: the DTW program equals exhaustive monotonic-path
/// enumeration bitwise on 1,000 random instances with n_t <= 6.
fn criterion_5() -> (bool, String) {
    let t0 = Instant::now();
    let mut rng = Rng::new(derive_seed(505, "dtw-oracle"));
    let mut checked = 0u32;
    let mut all_equal = true;
    for _ in 0..1000 {
        let n = 1 + rng.bounded(6) as usize;
        let m = 1 + rng.bounded(6) as usize;
        let c = 2 + rng.bounded(7) as usize;
        let a = FrameSequence::new(NdArray::from_fn(&[n, c], |_| rng.gaussian())).unwrap();
        let b = FrameSequence::new(NdArray::from_fn(&[m, c], |_| rng.gaussian())).unwrap();
        let lib: f64 = dtw_similarity(&a, &b).unwrap();
        let oracle = common::brute_force_dtw(&a, &b);
        if lib != oracle {
            all_equal = false;
            break;
        }
        checked += 1;
    }
    let el = t0.elapsed().as_secs_f64();
    (
        all_equal && checked == 1000 && el < 60.0,
        format!("dtw oracle equivalence: bitwise equal on {checked}/1000 instances (n_t <= 6), {el:.1}s (< 60s)"),
    )
}

/// Criterion 6: measured log-log slopes over T in {8,...,128} sit in the
/// claimed bands and the analytic cost matches the instrumented census
/// within a T-independent factor of 4.
fn criterion_6() -> (bool, String) {
    let t0 = Instant::now();
    let t_values = [8usize, 16, 32, 64, 128];
    let cm = CostModel {
        way: 5,
        shot: 1,
        queries: 25,
        feature_dim: 64,
        frames: 8,
    };
    let imp = measure_scaling(StageKind::ImplicitPairwise, &t_values, &cm, 606).unwrap();
    let dtw = measure_scaling(StageKind::ExplicitDtwPairwise, &t_values, &cm, 606).unwrap();
    let mut census_ok = true;
    let mut worst_factor = 1.0f64;
    for method in [MatchMethod::Implicit, MatchMethod::ExplicitDtw] {
        for &t in &t_values {
            let cm_t = CostModel { frames: t, ..cm };
            let counted = census_match_cost(method, &cm_t, 606).unwrap() as f64;
            let analytic = analytic_match_cost(method, &cm_t) as f64;
            let ratio = counted / analytic;
            if !(0.25..=4.0).contains(&ratio) {
                census_ok = false;
            }
            worst_factor = worst_factor.max(ratio.max(1.0 / ratio));
        }
    }
    let el = t0.elapsed().as_secs_f64();
    let ok = (0.7..=1.3).contains(&imp.slope)
        && (1.7..=2.3).contains(&dtw.slope)
        && census_ok
        && el < 300.0;
    (
        ok,
        format!(
            "complexity: implicit slope {:.2} in [0.7,1.3], dtw slope {:.2} in [1.7,2.3], census within x{worst_factor:.2} of analytic (<= 4), {el:.0}s (< 300s)",
            imp.slope, dtw.slope
        ),
    )
}

fn permute_rows(x: &NdArray<f64>, perm: &[usize]) -> NdArray<f64> {
    let c = x.shape()[1];
    let mut data = Vec::with_capacity(x.data().len());
    for &p in perm {
        data.extend_from_slice(x.row(p));
    }
    NdArray::from_vec(&[perm.len(), c], data).unwrap()
}

/// Criterion 7: structural invariants of the attention stack and metric.
fn criterion_7() -> (bool, String) {
    let mut rng = Rng::new(707);

    // Residual-zero identity, bitwise: zero W_o turns both attention
    // stages into exact identities.
    let residual_ok = {
        let mut set = ParamSet::<f64>::new();
        let sp = MultiHeadParams::new(&mut set, "sp", 8, 2, &mut rng).unwrap();
        let te = MultiHeadParams::new(&mut set, "te", 8, 2, &mut rng).unwrap();
        for name in ["sp.w_o", "te.w_o"] {
            let id = set.find(name).unwrap();
            let shape = set.value(id).shape().to_vec();
            set.get_mut(id).value = NdArray::zeros(&shape);
        }
        let mut tape = Tape::new();
        let f_val = NdArray::from_fn(&[3, 2, 2, 8], |_| rng.gaussian());
        let f = tape.input(f_val.clone());
        let sp_out = spatial_encode(&mut tape, &set, &sp, f).unwrap();
        let z_val = NdArray::from_fn(&[3, 8], |_| rng.gaussian());
        let z = tape.input(z_val.clone());
        let te_out = temporal_encode(&mut tape, &set, &te, z).unwrap();
        tape.value(sp_out).data() == f_val.data() && tape.value(te_out).data() == z_val.data()
    };

    // Softmax rows sum to one.
    let softmax_ok = {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(NdArray::from_fn(&[6, 9], |_| 3.0 * rng.gaussian()));
        let s = tape.softmax(x, 1).unwrap();
        let v = tape.value(s);
        (0..6).all(|i| (v.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-6)
    };

    // Multi-head attention is permutation-equivariant over rows.
    let equivariance_ok = {
        let mut set = ParamSet::<f64>::new();
        let mha = MultiHeadParams::new(&mut set, "m", 8, 2, &mut rng).unwrap();
        let x_val = NdArray::from_fn(&[6, 8], |_| rng.gaussian());
        let mut perm: Vec<usize> = (0..6).collect();
        while perm.iter().enumerate().all(|(i, &p)| i == p) {
            rng.shuffle(&mut perm);
        }
        let mut tape = Tape::new();
        let x = tape.input(x_val.clone());
        let out = mha.attend(&mut tape, &set, x).unwrap();
        let px = tape.input(permute_rows(&x_val, &perm));
        let pout = mha.attend(&mut tape, &set, px).unwrap();
        let direct = permute_rows(tape.value(out), &perm);
        let permuted = tape.value(pout);
        direct
            .data()
            .iter()
            .zip(permuted.data())
            .all(|(a, b)| (a - b).abs() < 1e-5)
    };

    // Positional encoding injects order: with the sinusoidal table added,
    // the equivariance residual is large.
    let (pos_ok, pos_residual) = {
        let mut set = ParamSet::<f64>::new();
        let mha = MultiHeadParams::new(&mut set, "t", 16, 4, &mut rng).unwrap();
        let enc =
            PositionalEncoder::<f64>::new(&mut set, "pos", PosMode::Sinusoidal, 8, 16, &mut rng);
        let z_val = NdArray::from_fn(&[8, 16], |_| rng.gaussian());
        let mut perm: Vec<usize> = (0..8).collect();
        while perm.iter().enumerate().all(|(i, &p)| i == p) {
            rng.shuffle(&mut perm);
        }
        let mut tape = Tape::new();
        let z = tape.input(z_val.clone());
        let zp = enc.apply(&mut tape, &set, z).unwrap();
        let out = temporal_encode(&mut tape, &set, &mha, zp).unwrap();
        let z2 = tape.input(permute_rows(&z_val, &perm));
        let zp2 = enc.apply(&mut tape, &set, z2).unwrap();
        let out2 = temporal_encode(&mut tape, &set, &mha, zp2).unwrap();
        let residual = permute_rows(tape.value(out), &perm)
            .data()
            .iter()
            .zip(tape.value(out2).data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        (residual > 1e-3, residual)
    };

    // Cosine: range bound and scale invariance.
    let cosine_ok = {
        let mut ok = true;
        for _ in 0..50 {
            let a: Vec<f64> = (0..16).map(|_| rng.gaussian()).collect();
            let b: Vec<f64> = (0..16).map(|_| rng.gaussian()).collect();
            let c = cosine(&a, &b, &mut ());
            ok &= c.abs() <= 1.0 + 1e-12;
            let alpha = rng.uniform(0.01, 100.0);
            let beta = rng.uniform(0.01, 100.0);
            let sa: Vec<f64> = a.iter().map(|v| alpha * v).collect();
            let sb: Vec<f64> = b.iter().map(|v| beta * v).collect();
            ok &= (cosine(&sa, &sb, &mut ()) - c).abs() < 1e-6;
        }
        ok
    };

    let ok = residual_ok && softmax_ok && equivariance_ok && pos_ok && cosine_ok;
    (
        ok,
        format!(
            "structural invariants: residual-zero bitwise {residual_ok}, softmax row-stochastic {softmax_ok}, head permutation equivariance {equivariance_ok}, positional order sensitivity {pos_ok} (residual {pos_residual:.2e} > 1e-3), cosine range/scale {cosine_ok}"
        ),
    )
}

/// Criterion 8: protocol fidelity — episode invariants over 10,000 draws,
/// chance-level untrained accuracy on classless data, closed-form CIs, and
/// bitwise beta=0 loss equality.
fn criterion_8() -> (bool, String) {
    // 10,000 seeded draws across the full shape lattice all validate.
    let spec = default_synthetic_spec(1);
    let (manifest, _provider) = synthetic_provider::<f64>(&spec, Precision::F64).unwrap();
    let pool = manifest.class_ids();
    let mut rng = Rng::new(derive_seed(8, "episodes"));
    let mut draws_ok = true;
    for _ in 0..10_000 {
        let way = 2 + rng.bounded(7) as usize;
        let shot = 1 + rng.bounded(3) as usize;
        let q = 1 + rng.bounded(3) as usize;
        let ep = sample_episode(&manifest, &pool, way, shot, q, &mut rng).unwrap();
        if ep.validate().is_err() {
            draws_ok = false;
            break;
        }
    }

    // Untrained accuracy sits within 3 sigma of 1/C. This must run on
    // noise-dominated features (sigma >> motif scale): the untrained
    // residual pipeline preserves input separability, so on clean motifs
    // an untrained matcher is legitimately above chance. On classless
    // noise the check verifies the protocol leaks no labels.
    let noise_spec = SyntheticSpec {
        num_class_pairs: 3,
        n_c: 8,
        h_f: 2,
        w_f: 2,
        noise_sigma: 25.0,
        ..default_synthetic_spec(11)
    };
    let (nman, nprov) = synthetic_provider::<f64>(&noise_spec, Precision::F64).unwrap();
    let npool = nman.class_ids();
    let mut nset = ParamSet::new();
    let nmodel = ItanModel::<f64>::init(
        nman.dims,
        ModelConfig::default(),
        npool.clone(),
        8,
        &mut nset,
    )
    .unwrap();
    let ec = EvalConfig {
        runs: 5,
        episodes_per_run: 100,
        way: 5,
        shot: 1,
        queries_per_class: 3,
        metric: None,
    };
    let rep = evaluate(&nmodel, &nset, &nman, &nprov, &npool, &ec, 8).unwrap();
    let n_queries = (5 * 100 * 5 * 3) as f64;
    let sigma = (0.2f64 * 0.8 / n_queries).sqrt();
    let chance_dev = (rep.mean - 0.2).abs();
    let chance_ok = chance_dev < 3.0 * sigma;

    // Closed-form confidence intervals.
    let ci_ok = (ci95_half_width(&[0.4, 0.6]) - 0.196).abs() < 1e-12
        && ci95_half_width(&[0.5]) == 0.0
        && (ci95_half_width(&[0.2, 0.4, 0.6]) - 1.96 * 0.2 / 3.0f64.sqrt()).abs() < 1e-12
        && rep.ci95 == ci95_half_width(&rep.runs);

    // beta = 0: the joint loss is bitwise the meta loss.
    let beta0_ok = {
        let tiny = SyntheticSpec {
            num_class_pairs: 2,
            n_c: 8,
            h_f: 2,
            w_f: 2,
            samples_per_class: 4,
            ..default_synthetic_spec(21)
        };
        let (tman, tprov) = synthetic_provider::<f64>(&tiny, Precision::F64).unwrap();
        let tpool = tman.class_ids();
        let mut tset = ParamSet::new();
        let tmodel = ItanModel::<f64>::init(
            tman.dims,
            ModelConfig::default(),
            tpool.clone(),
            88,
            &mut tset,
        )
        .unwrap();
        let ep =
            sample_episode(&tman, &tpool, 3, 1, 2, &mut Rng::new(derive_seed(88, "ep"))).unwrap();
        let mut tape = Tape::new();
        let loss = tmodel
            .total_loss_on_tape(
                &mut tape,
                &tset,
                &ep,
                &tprov,
                LossMode::Joint { beta: 0.0 },
                10.0,
            )
            .unwrap();
        tape.value(loss.total).data() == tape.value(loss.meta).data()
    };

    let ok = draws_ok && chance_ok && ci_ok && beta0_ok;
    (
        ok,
        format!(
            "protocol fidelity: 10,000 episode draws valid {draws_ok}, untrained accuracy {:.4} within 3 sigma of 0.2 (|dev| {chance_dev:.4} < {:.4}), closed-form CIs {ci_ok}, beta=0 bitwise {beta0_ok}",
            rep.mean,
            3.0 * sigma
        ),
    )
}

/// Criterion 9: interchange — FVF1 and checkpoint round trips are bitwise
/// exact and seeded library runs are fully deterministic (the CLI suite
/// separately asserts byte-identical artifacts across process runs).
fn criterion_9() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng::new(909);

    // FVF1 round trips, both precisions.
    let fm64 = FeatureMap::new(NdArray::<f64>::from_fn(&[3, 2, 2, 5], |_| rng.gaussian())).unwrap();
    let p64 = dir.path().join("a64.fvf");
    write_feature_file(&p64, &fm64).unwrap();
    let rt64: FeatureMap<f64> = read_feature_file(&p64).unwrap();
    let fm32 = FeatureMap::new(NdArray::<f32>::from_fn(&[2, 3, 1, 4], |_| {
        rng.gaussian() as f32
    }))
    .unwrap();
    let p32 = dir.path().join("a32.fvf");
    write_feature_file(&p32, &fm32).unwrap();
    let rt32: FeatureMap<f32> = read_feature_file(&p32).unwrap();
    let fvf_ok = rt64.values().data() == fm64.values().data()
        && rt32.values().data() == fm32.values().data();

    // Checkpoint round trip restores every tensor bitwise into a
    // differently-initialized parameter set.
    let spec = SyntheticSpec {
        num_class_pairs: 2,
        n_c: 8,
        h_f: 2,
        w_f: 2,
        samples_per_class: 3,
        ..default_synthetic_spec(31)
    };
    let (manifest, provider) = synthetic_provider::<f32>(&spec, Precision::F32).unwrap();
    let pool = manifest.class_ids();
    let mut set_a = ParamSet::new();
    let _model_a = ItanModel::<f32>::init(
        manifest.dims,
        ModelConfig::default(),
        pool.clone(),
        5,
        &mut set_a,
    )
    .unwrap();
    let ckpt_path = dir.path().join("model.itan");
    let state = Rng::new(99).state();
    Checkpoint::from_params(&set_a, "{}".to_string(), 17, state)
        .save(&ckpt_path)
        .unwrap();
    let mut set_b = ParamSet::new();
    let model_b = ItanModel::<f32>::init(
        manifest.dims,
        ModelConfig::default(),
        pool.clone(),
        6,
        &mut set_b,
    )
    .unwrap();
    let loaded = Checkpoint::load(&ckpt_path).unwrap();
    loaded.apply_to(&mut set_b).unwrap();
    let mut ckpt_ok = loaded.episode == 17 && loaded.rng_state == state;
    for id in set_a.ids() {
        let (a, b) = (set_a.get(id), set_b.get(id));
        ckpt_ok &= a.name == b.name && a.value.data() == b.value.data();
    }
    // Re-encoding the decoded checkpoint reproduces the bytes.
    let bytes = loaded.encode();
    ckpt_ok &= Checkpoint::decode(&bytes).unwrap().encode() == bytes;

    // Library determinism: two independent seeded evaluations produce
    // identical reports (and identical JSON bytes).
    let ec = EvalConfig {
        runs: 2,
        episodes_per_run: 25,
        way: 3,
        shot: 1,
        queries_per_class: 2,
        metric: None,
    };
    let rep1 = evaluate(&model_b, &set_b, &manifest, &provider, &pool, &ec, 77).unwrap();
    let rep2 = evaluate(&model_b, &set_b, &manifest, &provider, &pool, &ec, 77).unwrap();
    let det_ok = rep1 == rep2
        && serde_json::to_string(&rep1).unwrap() == serde_json::to_string(&rep2).unwrap();

    let ok = fvf_ok && ckpt_ok && det_ok;
    (
        ok,
        format!(
            "interchange: FVF1 round trips bitwise {fvf_ok}, checkpoint round trip bitwise {ckpt_ok}, seeded evaluation deterministic {det_ok} (CLI byte-level determinism asserted in the CLI suite)"
        ),
    )
}

type Check = fn() -> (bool, String);

#[test]
fn acceptance_criteria() {
    let checks: Vec<(usize, Check)> = vec![
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed: Vec<usize> = Vec::new();
    for (index, check) in checks {
        let (pass, detail) = check();
        // Written straight to stdout (not println!) so the lines show up
        // even under the harness's default output capture.
        let line = format!(
            "criterion {index} [{}] {detail}\n",
            if pass { "PASS" } else { "FAIL" }
        );
        std::io::Write::write_all(&mut std::io::stdout(), line.as_bytes()).unwrap();
        if !pass {
            failed.push(index);
        }
    }
    assert!(failed.is_empty(), "failed acceptance criteria: {failed:?}");
}
