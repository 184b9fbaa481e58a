//! Manual throughput probe, ignored by default:
//! `cargo test -p urma --test throughput_probe -- --ignored --nocapture`

use urma::env::EnvConfig;
use urma::morphology::{generate_surrogate_robot, MorphologyClass};
use urma::policy::{ArchConfig, Architecture, PolicyParams};
use urma::trainer::{TrainConfig, Trainer};

#[test]
#[ignore]
fn training_throughput() {
    let robots: Vec<_> = (0..3)
        .map(|s| generate_surrogate_robot(200 + s, MorphologyClass::Quadruped, (8, 12)))
        .collect();
    let refs: Vec<&_> = robots.iter().collect();
    let train = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let params = PolicyParams::new(Architecture::Urma, ArchConfig::tiny(), &refs, 0);
    println!("params: {}", params.count_parameters().total);
    let mut trainer = Trainer::new(params, robots, train, EnvConfig::default()).unwrap();
    let start = std::time::Instant::now();
    let mut steps = 0u64;
    for i in 0..6 {
        let report = trainer.iteration().unwrap();
        steps = report.global_step;
        println!(
            "iter {i}: step {} lr {:.2e} policy {:.4} value {:.4}",
            report.global_step, report.lr, report.policy_loss, report.value_loss
        );
    }
    let dt = start.elapsed().as_secs_f64();
    let sps = steps as f64 / dt;
    println!("throughput: {sps:.0} env steps/s -> 2M steps in {:.1} min", 2e6 / sps / 60.0);
}
