//! Self-check suites: the independent oracles that pin the implementation,
//! packaged so the CLI can run them on demand.
//!
//! Three suites: analytic gradients against central finite differences,
//! slot-array pulse coincidence against `min`, and the device learning
//! cycle against the software kernel.

use crate::device::{run_learning_cycle, run_phase, MemristorDevice, PulseProtocol};
use crate::network::{
    augment_with_bias, compute_loss, output_delta, Activation, BackwardMode, LossKind, Network,
};
use crate::numerics::Matrix;
use crate::pulse::{
    coincidence_count, encode_pulses, Phase, Polarity, PulseTrain, QuantizationScheme,
};
use crate::rng::SeededRng;
use crate::update::{absmin_update, batch_weight_delta, UpdateKind, UpdateMethod};

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteReport {
    fn pass(name: &'static str, detail: String) -> Self {
        SuiteReport {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        SuiteReport {
            name,
            passed: false,
            detail,
        }
    }
}

pub const SUITE_NAMES: [&str; 3] = ["gradient", "pulse", "device"];

/// Times/transposed/continuous batch updates must equal central finite
/// differences of the cross-entropy loss on a small sigmoid network.
pub fn gradient_suite() -> SuiteReport {
    const NAME: &str = "gradient";
    let mut rng = SeededRng::new(0xFD17);
    let mut net = match Network::init(&[4, 3, 2], Activation::Sigmoid, false, 0xFD18) {
        Ok(n) => n,
        Err(e) => return SuiteReport::fail(NAME, e.to_string()),
    };
    let inputs = Matrix::from_fn(5, 4, |_, _| rng.uniform(0.0, 1.0));
    let targets = Matrix::from_fn(5, 2, |_, _| {
        if rng.uniform(0.0, 1.0) < 0.5 {
            1.0
        } else {
            0.0
        }
    });

    let loss = |net: &Network| -> f64 {
        let trace = net.forward(&inputs).unwrap();
        compute_loss(trace.outputs(), &targets, LossKind::CrossEntropy).unwrap()
    };
    let method = UpdateMethod::continuous(UpdateKind::Times);
    let trace = net.forward(&inputs).unwrap();
    let d_out = output_delta(trace.outputs(), &targets).unwrap();
    let deltas = net
        .backward_deltas(&trace, &d_out, BackwardMode::Transposed)
        .unwrap();
    let grads: Vec<Matrix> = (0..net.num_weight_layers())
        .map(|k| {
            let x = augment_with_bias(&trace.activations[k]);
            batch_weight_delta(&method, &x, &deltas[k]).unwrap()
        })
        .collect();

    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.index(net.num_weight_layers());
        let i = rng.index(net.weights(k).rows());
        let j = rng.index(net.weights(k).cols());
        let orig = net.weights(k).at(i, j);
        net.weights_mut(k).set(i, j, orig + h);
        let lp = loss(&net);
        net.weights_mut(k).set(i, j, orig - h);
        let lm = loss(&net);
        net.weights_mut(k).set(i, j, orig);
        let fd = (lp - lm) / (2.0 * h);
        let an = grads[k].at(i, j);
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        worst = worst.max(rel);
        if rel >= 1e-5 {
            return SuiteReport::fail(
                NAME,
                format!(
                    "gradient vs finite differences: layer {k} w[{i}][{j}] analytic {an} \
                     vs central difference {fd} (rel {rel:.2e} >= 1e-5)"
                ),
            );
        }
    }
    SuiteReport::pass(NAME, format!("100 coordinates, max rel error {worst:.2e}"))
}

/// Slot-array coincidence must equal `min` for every count pair up to 100,
/// and pulse encoding must round-trip through the grid.
pub fn pulse_suite() -> SuiteReport {
    const NAME: &str = "pulse";
    for na in 0..=100u32 {
        for nb in 0..=100u32 {
            let a = PulseTrain::new(na, Polarity::Positive, Phase::Potentiation);
            let b = PulseTrain::new(nb, Polarity::Negative, Phase::Potentiation);
            let got = match coincidence_count(&a, &b) {
                Ok(c) => c,
                Err(e) => return SuiteReport::fail(NAME, e.to_string()),
            };
            if got != na.min(nb) {
                return SuiteReport::fail(
                    NAME,
                    format!("coincidence vs min: counts ({na}, {nb}) gave {got}"),
                );
            }
        }
    }
    let mut rng = SeededRng::new(0x9A15E);
    for levels in [20u32, 100] {
        let schemes = [
            QuantizationScheme::discrete(0.0, 5.0, levels).unwrap(),
            QuantizationScheme::discrete(-1.0, 2.0, levels).unwrap(),
        ];
        for scheme in schemes {
            let step = scheme.step().unwrap();
            for _ in 0..500 {
                let v = rng.uniform(scheme.lo() - 0.5, scheme.hi() + 0.5);
                let t = encode_pulses(v, &scheme).unwrap();
                let sign = if t.polarity == Polarity::Negative {
                    -1.0
                } else {
                    1.0
                };
                if sign * (t.count as f64 * step) != scheme.quantize(v) {
                    return SuiteReport::fail(
                        NAME,
                        format!("encode round trip broke at v = {v} ({levels} levels)"),
                    );
                }
            }
        }
    }
    SuiteReport::pass(
        NAME,
        "101x101 count pairs and encode round trips".to_string(),
    )
}

/// Device learning cycle against the software kernel.
pub fn device_suite() -> SuiteReport {
    device_suite_against(absmin_update)
}

/// Same, but with an injectable reference kernel (test hook).
pub fn device_suite_against(kernel: impl Fn(f64, f64) -> f64) -> SuiteReport {
    const NAME: &str = "device";
    let proto = PulseProtocol::default_ideal();

    // Locality: one electrode alone never writes.
    for count in 0..=100u32 {
        for phase in [Phase::Potentiation, Phase::Depression] {
            let (px, pd) = match phase {
                Phase::Potentiation => (Polarity::Positive, Polarity::Negative),
                Phase::Depression => (Polarity::Negative, Polarity::Positive),
            };
            let mut dev = MemristorDevice::default_ideal();
            let g0 = dev.conductance();
            let r1 = run_phase(
                &mut dev,
                &proto,
                &PulseTrain::new(count, px, phase),
                &PulseTrain::new(0, pd, phase),
                phase,
            );
            let r2 = run_phase(
                &mut dev,
                &proto,
                &PulseTrain::new(0, px, phase),
                &PulseTrain::new(count, pd, phase),
                phase,
            );
            if r1.is_err() || r2.is_err() || dev.conductance() != g0 {
                return SuiteReport::fail(
                    NAME,
                    format!("locality: single-electrode drive wrote at count {count} ({phase:?})"),
                );
            }
        }
    }

    // Cycle equivalence on matched-step grids: conductance steps must equal
    // the kernel prediction in value units.
    let sx = QuantizationScheme::discrete(0.0, 5.0, 20).unwrap();
    let sd = QuantizationScheme::discrete(-5.0, 5.0, 40).unwrap();
    let step = sx.step().unwrap();
    let mut rng = SeededRng::new(0xDE1CE);
    for _ in 0..2000 {
        let x = rng.uniform(0.0, 5.5);
        let d = rng.uniform(-5.5, 5.5);
        let mut dev = MemristorDevice::default_ideal();
        let g0 = dev.conductance();
        if let Err(e) = run_learning_cycle(&mut dev, &proto, x, d, &sx, &sd) {
            return SuiteReport::fail(NAME, e.to_string());
        }
        let got = (dev.conductance() - g0) / dev.g_step();
        let expected = -kernel(sx.quantize(x), sd.quantize(d)) / step;
        if (got - expected).abs() > 1e-6 {
            return SuiteReport::fail(
                NAME,
                format!(
                    "device cycle equivalence: x={x:.4} d={d:.4} moved {got:.3} steps, \
                     kernel predicts {expected:.3}"
                ),
            );
        }
    }
    SuiteReport::pass(
        NAME,
        "locality and 2000 cycle-equivalence samples".to_string(),
    )
}

pub fn all_suites() -> Vec<SuiteReport> {
    vec![gradient_suite(), pulse_suite(), device_suite()]
}
