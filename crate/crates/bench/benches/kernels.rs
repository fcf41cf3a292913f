use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use disag_bench::{factor_design, factor_pattern, factor_var, survey_series};
use disag_core::bvar::{prior_defaults, PosteriorDraws, Sampler};
use disag_core::dispersion::{simulate_panel, MAEconomy};
use disag_core::structural::{fevd, impulse_responses};
use disag_core::survey_index::{pca_first_component, standardize, tail_disagreement};
use nalgebra::DMatrix;

fn survey(c: &mut Criterion) {
    let s = survey_series(600);
    c.bench_function("tail_index_600", |b| b.iter(|| tail_disagreement(black_box(&s))));
    let inputs: Vec<_> = (0..4)
        .map(|i| {
            let mut idx = tail_disagreement(&survey_series(600 + i));
            idx.values.truncate(600);
            idx.dates.truncate(600);
            standardize(&idx).unwrap()
        })
        .collect();
    c.bench_function("pca_4x600", |b| b.iter(|| pca_first_component(black_box(&inputs)).unwrap()));
}

fn panel(c: &mut Criterion) {
    let econ = MAEconomy::geometric(0.5, 12, 2.0, 3.0, 10_000).unwrap();
    let mut seed = 0u64;
    c.bench_function("panel_10000_agents", |b| {
        b.iter(|| {
            seed += 1;
            simulate_panel(black_box(&econ), 12, seed).unwrap()
        })
    });
}

fn gibbs(c: &mut Criterion) {
    let design = factor_design(400);
    let pattern = factor_pattern();
    let priors = prior_defaults(4, 2);
    let mut sampler = Sampler::new(&design, &pattern, &priors, 1).unwrap();
    c.bench_function("gibbs_sweep_n4_t400", |b| b.iter(|| sampler.sweep().unwrap()));
}

fn structural(c: &mut Criterion) {
    let truth = factor_var();
    let draws = PosteriorDraws {
        n_lags: 1,
        phi: vec![truth.phi.clone(); 500],
        lambda: vec![truth.lambda.clone(); 500],
        sigma: vec![truth.sigma2.clone(); 500],
        factors: vec![DMatrix::zeros(1, 2); 500],
        horseshoe_local: vec![DMatrix::zeros(4, 5); 500],
        horseshoe_global: vec![truth.sigma2.clone(); 500],
    };
    c.bench_function("irf_500_draws_h48", |b| {
        b.iter_batched(|| draws.clone(), |d| impulse_responses(&d, 48).unwrap(), BatchSize::LargeInput)
    });
    c.bench_function("fevd_500_draws_h48", |b| b.iter(|| fevd(black_box(&draws), 48).unwrap()));
}

criterion_group!(benches, survey, panel, gibbs, structural);
criterion_main!(benches);
