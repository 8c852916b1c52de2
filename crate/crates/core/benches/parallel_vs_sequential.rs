use std::f64::consts::FRAC_PI_2;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use seqtherm::bath::{OhmicClass, ThermalBath};
use seqtherm::correlations::{derivative_lags, CorrelationOptions, CorrelationSet};
use seqtherm::estimation::{mle_estimate, MleOptions};
use seqtherm::sequential::{build_aux_covariance, sample_records, MeasurementProtocol};
use seqtherm::spectroscopy::pair_correlation_matrix;
use seqtherm::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bath(alpha: f64, beta: f64) -> ThermalBath {
    ThermalBath::new(beta, OhmicClass::ohmic(alpha, 10.0).unwrap(), 0.1).unwrap()
}

fn lag_transform(c: &mut Criterion) {
    let b = bath(0.1, 100.0);
    let mut g = c.benchmark_group("derivative_lags_4096");
    for (name, exec) in MODES {
        let opts = CorrelationOptions {
            execution: exec,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| derivative_lags(black_box(&b), 0.1, 4096, &opts).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let p = MeasurementProtocol::new(100, 0.1, FRAC_PI_2).unwrap();
    let corr = CorrelationSet::compute(&bath(20.0, 10.0), p.grid(), &CorrelationOptions::default()).unwrap();
    let aux = build_aux_covariance(&corr, &p, false).unwrap();
    let mut g = c.benchmark_group("sample_records_N100_M5000");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| sample_records(&p, &aux, 5000, black_box(3), exec).unwrap())
        });
    }
    g.finish();
}

fn pair_correlation(c: &mut Criterion) {
    let p = MeasurementProtocol::new(64, 0.1, FRAC_PI_2).unwrap();
    let corr = CorrelationSet::compute(&bath(6.0, 10.0), p.grid(), &CorrelationOptions::default()).unwrap();
    let aux = build_aux_covariance(&corr, &p, false).unwrap();
    let records = sample_records(&p, &aux, 20_000, 5, Execution::Parallel).unwrap();
    let mut g = c.benchmark_group("pair_correlation_N64_M20000");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| pair_correlation_matrix(black_box(&records), exec).unwrap())
        });
    }
    g.finish();
}

fn mle_grid(c: &mut Criterion) {
    let b = bath(20.0, 10.0);
    let p = MeasurementProtocol::new(100, 0.1, FRAC_PI_2).unwrap();
    let corr = CorrelationSet::compute(&b, p.grid(), &CorrelationOptions::default()).unwrap();
    let aux = build_aux_covariance(&corr, &p, false).unwrap();
    let records = sample_records(&p, &aux, 2000, 8, Execution::Parallel).unwrap();
    let mut g = c.benchmark_group("mle_N100_M2000");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = MleOptions {
            execution: exec,
            correlation: CorrelationOptions {
                execution: exec,
                ..Default::default()
            },
            ..MleOptions::new(2.0, 40.0)
        };
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| mle_estimate(black_box(&records), &p, &b, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, lag_transform, sampling, pair_correlation, mle_grid);
criterion_main!(benches);
