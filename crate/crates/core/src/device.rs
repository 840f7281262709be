//! Idealized threshold-switching memristor driven by the two-phase pulse
//! protocol.
//!
//! A device sits between two electrodes. Each neuron fires its train at
//! half the write amplitude, so a lone train stays inside the dead zone
//! and only coincident pulses (full amplitude across the device) move the
//! conductance. One learning cycle runs a potentiation phase and then a
//! depression phase, always both; which phase carries the error signal's
//! pulses encodes its sign. The net conductance change per cycle is
//! `±g_step * min(pulse counts)` — the hardware form of the absmin kernel.

use crate::error::{Error, Result};
use crate::pulse::{encode_pulses, Phase, Polarity, PulseTrain, QuantizationScheme};

/// Conductance state with write thresholds and a fixed per-pulse step.
///
/// No cycle-to-cycle variability and no state-dependent step size: every
/// super-threshold pulse moves the conductance by exactly `g_step`, clamped
/// to `[g_min, g_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemristorDevice {
    conductance: f64,
    v_on: f64,
    v_off: f64,
    g_step: f64,
    g_min: f64,
    g_max: f64,
}

// Validation uses negated comparisons so NaN parameters are rejected too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
impl MemristorDevice {
    pub fn new(
        conductance: f64,
        v_on: f64,
        v_off: f64,
        g_step: f64,
        g_min: f64,
        g_max: f64,
    ) -> Result<Self> {
        if !(v_off < 0.0 && 0.0 < v_on) {
            return Err(Error::ProtocolViolation(format!(
                "thresholds must straddle zero: v_off {v_off}, v_on {v_on}"
            )));
        }
        if !(g_step > 0.0) {
            return Err(Error::ProtocolViolation(format!(
                "g_step {g_step} must be > 0"
            )));
        }
        if !(g_min <= conductance && conductance <= g_max) {
            return Err(Error::ProtocolViolation(format!(
                "conductance {conductance} outside [{g_min}, {g_max}]"
            )));
        }
        Ok(MemristorDevice {
            conductance,
            v_on,
            v_off,
            g_step,
            g_min,
            g_max,
        })
    }

    /// Mid-range device with unit thresholds; numbers are config defaults,
    /// chosen only to satisfy the protocol inequalities.
    pub fn default_ideal() -> Self {
        MemristorDevice::new(0.5, 1.0, -1.0, 1e-3, 0.0, 1.0).unwrap()
    }

    pub fn conductance(&self) -> f64 {
        self.conductance
    }

    pub fn g_step(&self) -> f64 {
        self.g_step
    }

    /// One voltage event across the device: above `v_on` the conductance
    /// steps up, below `v_off` it steps down, anywhere in the dead zone
    /// nothing happens. Saturates at the conductance bounds.
    pub fn apply_voltage(&mut self, u: f64) {
        if u > self.v_on {
            self.conductance = (self.conductance + self.g_step).min(self.g_max);
        } else if u < self.v_off {
            self.conductance = (self.conductance - self.g_step).max(self.g_min);
        }
    }
}

/// Write amplitudes for the two cycle phases.
///
/// `u_plus` must switch the device while `u_plus / 2` must not (and
/// symmetrically for `u_minus`), otherwise a lone train would write.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseProtocol {
    pub u_plus: f64,
    pub u_minus: f64,
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
impl PulseProtocol {
    pub fn default_ideal() -> Self {
        PulseProtocol {
            u_plus: 1.5,
            u_minus: -1.5,
        }
    }

    pub fn validate(&self, dev: &MemristorDevice) -> Result<()> {
        if !(self.u_plus > dev.v_on) {
            return Err(Error::ProtocolViolation(format!(
                "u_plus {} does not exceed v_on {}",
                self.u_plus, dev.v_on
            )));
        }
        if !(self.u_plus / 2.0 < dev.v_on) {
            return Err(Error::ProtocolViolation(format!(
                "u_plus/2 {} is not inside the dead zone (v_on {})",
                self.u_plus / 2.0,
                dev.v_on
            )));
        }
        if !(self.u_minus < dev.v_off) {
            return Err(Error::ProtocolViolation(format!(
                "u_minus {} does not undercut v_off {}",
                self.u_minus, dev.v_off
            )));
        }
        if !(self.u_minus / 2.0 > dev.v_off) {
            return Err(Error::ProtocolViolation(format!(
                "u_minus/2 {} is not inside the dead zone (v_off {})",
                self.u_minus / 2.0,
                dev.v_off
            )));
        }
        Ok(())
    }

    /// Half-amplitudes on (x electrode, delta electrode) for a phase; the
    /// delta side is driven with opposite polarity so coincidences see the
    /// full write amplitude.
    fn electrode_amplitudes(&self, phase: Phase) -> (f64, f64) {
        match phase {
            Phase::Potentiation => (self.u_plus / 2.0, -self.u_plus / 2.0),
            Phase::Depression => (self.u_minus / 2.0, -self.u_minus / 2.0),
        }
    }
}

fn expected_polarities(phase: Phase) -> (Polarity, Polarity) {
    match phase {
        Phase::Potentiation => (Polarity::Positive, Polarity::Negative),
        Phase::Depression => (Polarity::Negative, Polarity::Positive),
    }
}

/// Drives one phase slot by slot: both trains start at slot 0 of the shared
/// clock, the device sees the electrode difference each slot.
pub fn run_phase(
    dev: &mut MemristorDevice,
    protocol: &PulseProtocol,
    x_train: &PulseTrain,
    d_train: &PulseTrain,
    phase: Phase,
) -> Result<()> {
    protocol.validate(dev)?;
    if x_train.phase != phase || d_train.phase != phase {
        return Err(Error::PhaseMismatch);
    }
    let (want_x, want_d) = expected_polarities(phase);
    if x_train.polarity != want_x || d_train.polarity != want_d {
        return Err(Error::ProtocolViolation(format!(
            "train polarities {:?}/{:?} do not fit the {:?} phase",
            x_train.polarity, d_train.polarity, phase
        )));
    }
    let (amp_x, amp_d) = protocol.electrode_amplitudes(phase);
    let slots = x_train.count.max(d_train.count);
    for slot in 0..slots {
        let v_x = if slot < x_train.count { amp_x } else { 0.0 };
        let v_d = if slot < d_train.count { amp_d } else { 0.0 };
        dev.apply_voltage(v_x - v_d);
    }
    Ok(())
}

fn run_cycle(
    dev: &mut MemristorDevice,
    protocol: &PulseProtocol,
    x: f64,
    d: f64,
    x_scheme: &QuantizationScheme,
    d_scheme: &QuantizationScheme,
    descend: bool,
) -> Result<()> {
    if x < 0.0 {
        return Err(Error::NegativeActivation(x));
    }
    let x_count = encode_pulses(x, x_scheme)?.count;
    let d_enc = encode_pulses(d, d_scheme)?;
    let d_negative = d_enc.polarity == Polarity::Negative;
    // Which phase carries the error signal's pulses encodes its sign; in
    // descend mode the routing is inverted so a positive error *lowers*
    // the conductance (gradient-descent direction).
    let d_in_potentiation = if descend { d_negative } else { !d_negative };

    let pot_d = if d_in_potentiation { d_enc.count } else { 0 };
    run_phase(
        dev,
        protocol,
        &PulseTrain::new(x_count, Polarity::Positive, Phase::Potentiation),
        &PulseTrain::new(pot_d, Polarity::Negative, Phase::Potentiation),
        Phase::Potentiation,
    )?;

    let dep_d = if d_in_potentiation { 0 } else { d_enc.count };
    run_phase(
        dev,
        protocol,
        &PulseTrain::new(x_count, Polarity::Negative, Phase::Depression),
        &PulseTrain::new(dep_d, Polarity::Positive, Phase::Depression),
        Phase::Depression,
    )?;
    Ok(())
}

/// One full cycle in the device-native plasticity convention: a positive
/// error signal potentiates. Net change `+g_step * sign(d) * min(counts)`.
pub fn run_plasticity_cycle(
    dev: &mut MemristorDevice,
    protocol: &PulseProtocol,
    x: f64,
    d: f64,
    x_scheme: &QuantizationScheme,
    d_scheme: &QuantizationScheme,
) -> Result<()> {
    run_cycle(dev, protocol, x, d, x_scheme, d_scheme, false)
}

/// One full cycle in the trainer convention: the error signal's sign is
/// flipped at the neuron boundary so the conductance moves opposite the
/// gradient, `-g_step * sign(d) * min(counts)` — the hardware realization
/// of `w <- w - lr * absmin(x, d)`. Both phases always run; requires
/// `x >= 0` (two-phase cycles cover only non-negative activations).
pub fn run_learning_cycle(
    dev: &mut MemristorDevice,
    protocol: &PulseProtocol,
    x: f64,
    d: f64,
    x_scheme: &QuantizationScheme,
    d_scheme: &QuantizationScheme,
) -> Result<()> {
    run_cycle(dev, protocol, x, d, x_scheme, d_scheme, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::update::absmin_update;

    fn x_scheme() -> QuantizationScheme {
        QuantizationScheme::discrete(0.0, 5.0, 20).unwrap()
    }

    fn d_scheme() -> QuantizationScheme {
        QuantizationScheme::discrete(-1.0, 2.0, 20).unwrap()
    }

    fn steps(before: f64, after: f64, g_step: f64) -> i64 {
        let ratio = (after - before) / g_step;
        let rounded = ratio.round();
        assert!(
            (ratio - rounded).abs() < 1e-6,
            "non-integer step count {ratio}"
        );
        rounded as i64
    }

    #[test]
    fn apply_voltage_dead_zone() {
        let mut dev = MemristorDevice::default_ideal();
        let g0 = dev.conductance();
        dev.apply_voltage(0.75); // u_plus / 2
        dev.apply_voltage(0.0);
        dev.apply_voltage(-0.75);
        assert_eq!(dev.conductance(), g0);
        dev.apply_voltage(1.5);
        assert_eq!(steps(g0, dev.conductance(), dev.g_step()), 1);
    }

    #[test]
    fn protocol_violations_rejected() {
        let dev = MemristorDevice::default_ideal();
        assert!(PulseProtocol {
            u_plus: 0.9,
            u_minus: -1.5
        }
        .validate(&dev)
        .is_err());
        assert!(PulseProtocol {
            u_plus: 2.5,
            u_minus: -1.5
        }
        .validate(&dev)
        .is_err()); // u+/2 writes
        assert!(PulseProtocol {
            u_plus: 1.5,
            u_minus: -0.9
        }
        .validate(&dev)
        .is_err());
        assert!(PulseProtocol::default_ideal().validate(&dev).is_ok());
    }

    #[test]
    fn potentiation_phase_steps_by_coincidence_count() {
        let mut dev = MemristorDevice::default_ideal();
        let proto = PulseProtocol::default_ideal();
        let g0 = dev.conductance();
        run_phase(
            &mut dev,
            &proto,
            &PulseTrain::new(5, Polarity::Positive, Phase::Potentiation),
            &PulseTrain::new(3, Polarity::Negative, Phase::Potentiation),
            Phase::Potentiation,
        )
        .unwrap();
        assert_eq!(steps(g0, dev.conductance(), dev.g_step()), 3);
    }

    #[test]
    fn inactive_delta_leaves_device_unchanged() {
        let mut dev = MemristorDevice::default_ideal();
        let proto = PulseProtocol::default_ideal();
        let g0 = dev.conductance();
        run_phase(
            &mut dev,
            &proto,
            &PulseTrain::new(5, Polarity::Positive, Phase::Potentiation),
            &PulseTrain::new(0, Polarity::Negative, Phase::Potentiation),
            Phase::Potentiation,
        )
        .unwrap();
        assert_eq!(dev.conductance(), g0);
    }

    #[test]
    fn depression_phase_steps_down() {
        let mut dev = MemristorDevice::default_ideal();
        let proto = PulseProtocol::default_ideal();
        let g0 = dev.conductance();
        run_phase(
            &mut dev,
            &proto,
            &PulseTrain::new(4, Polarity::Negative, Phase::Depression),
            &PulseTrain::new(2, Polarity::Positive, Phase::Depression),
            Phase::Depression,
        )
        .unwrap();
        assert_eq!(steps(g0, dev.conductance(), dev.g_step()), -2);
    }

    #[test]
    fn run_phase_rejects_wrong_phase_or_polarity() {
        let mut dev = MemristorDevice::default_ideal();
        let proto = PulseProtocol::default_ideal();
        let x = PulseTrain::new(2, Polarity::Positive, Phase::Potentiation);
        let d_wrong_phase = PulseTrain::new(2, Polarity::Negative, Phase::Depression);
        assert!(matches!(
            run_phase(&mut dev, &proto, &x, &d_wrong_phase, Phase::Potentiation),
            Err(Error::PhaseMismatch)
        ));
        let d_wrong_pol = PulseTrain::new(2, Polarity::Positive, Phase::Potentiation);
        assert!(run_phase(&mut dev, &proto, &x, &d_wrong_pol, Phase::Potentiation).is_err());
    }

    #[test]
    fn single_electrode_drive_never_writes() {
        // The locality guarantee: either train alone, in either phase,
        // leaves the conductance untouched for every count.
        let proto = PulseProtocol::default_ideal();
        for count in 0..=100u32 {
            for phase in [Phase::Potentiation, Phase::Depression] {
                let (px, pd) = super::expected_polarities(phase);
                let mut dev = MemristorDevice::default_ideal();
                let g0 = dev.conductance();
                run_phase(
                    &mut dev,
                    &proto,
                    &PulseTrain::new(count, px, phase),
                    &PulseTrain::new(0, pd, phase),
                    phase,
                )
                .unwrap();
                run_phase(
                    &mut dev,
                    &proto,
                    &PulseTrain::new(0, px, phase),
                    &PulseTrain::new(count, pd, phase),
                    phase,
                )
                .unwrap();
                assert_eq!(dev.conductance(), g0, "count {count} {phase:?}");
            }
        }
    }

    #[test]
    fn learning_cycle_noops() {
        let proto = PulseProtocol::default_ideal();
        let mut dev = MemristorDevice::default_ideal();
        let g0 = dev.conductance();
        run_learning_cycle(&mut dev, &proto, 3.0, 0.0, &x_scheme(), &d_scheme()).unwrap();
        assert_eq!(dev.conductance(), g0, "zero delta");
        // 0.05 is under half the 0.25 x-step, so x encodes to zero pulses.
        run_learning_cycle(&mut dev, &proto, 0.05, 1.0, &x_scheme(), &d_scheme()).unwrap();
        assert_eq!(dev.conductance(), g0, "x quantizes to zero");
    }

    #[test]
    fn learning_cycle_rejects_negative_x() {
        let proto = PulseProtocol::default_ideal();
        let mut dev = MemristorDevice::default_ideal();
        assert!(matches!(
            run_learning_cycle(&mut dev, &proto, -0.5, 1.0, &x_scheme(), &d_scheme()),
            Err(Error::NegativeActivation(_))
        ));
    }

    #[test]
    fn cycle_equivalence_over_full_grid() {
        // Every grid cell: conductance steps = -sign(d) * min(pulse counts)
        // for the learning cycle, and the plasticity cycle is its mirror.
        let proto = PulseProtocol::default_ideal();
        let sx = x_scheme();
        let sd = d_scheme();
        let x_step = sx.step().unwrap();
        let d_step = sd.step().unwrap();
        for kx in 0..=20i64 {
            for kd in -6..=13i64 {
                let x = kx as f64 * x_step;
                let d = kd as f64 * d_step;
                let expected = -kd.signum() * kx.min(kd.abs());

                let mut dev = MemristorDevice::default_ideal();
                let g0 = dev.conductance();
                run_learning_cycle(&mut dev, &proto, x, d, &sx, &sd).unwrap();
                assert_eq!(
                    steps(g0, dev.conductance(), dev.g_step()),
                    expected,
                    "learning cycle at kx={kx} kd={kd}"
                );

                let mut dev = MemristorDevice::default_ideal();
                run_plasticity_cycle(&mut dev, &proto, x, d, &sx, &sd).unwrap();
                assert_eq!(
                    steps(g0, dev.conductance(), dev.g_step()),
                    -expected,
                    "plasticity cycle at kx={kx} kd={kd}"
                );
            }
        }
    }

    #[test]
    fn cycle_with_matched_steps_reproduces_software_kernel() {
        // With equal grid steps on both signals, pulse-count min times step
        // equals the value-domain absmin exactly.
        let proto = PulseProtocol::default_ideal();
        let sx = QuantizationScheme::discrete(0.0, 5.0, 20).unwrap(); // step 0.25
        let sd = QuantizationScheme::discrete(-5.0, 5.0, 40).unwrap(); // step 0.25
        let step = sx.step().unwrap();
        let mut rng = SeededRng::new(99);
        for _ in 0..500 {
            let x = rng.uniform(0.0, 5.5);
            let d = rng.uniform(-5.5, 5.5);
            let mut dev = MemristorDevice::default_ideal();
            let g0 = dev.conductance();
            run_learning_cycle(&mut dev, &proto, x, d, &sx, &sd).unwrap();
            let n = steps(g0, dev.conductance(), dev.g_step());
            let expected = -absmin_update(sx.quantize(x), sd.quantize(d)) / step;
            assert!(
                (n as f64 - expected).abs() < 1e-9,
                "x={x} d={d}: {n} device steps vs kernel {expected}"
            );
        }
    }

    #[test]
    fn phase_order_independent_without_saturation() {
        let proto = PulseProtocol::default_ideal();
        let sx = x_scheme();
        let sd = d_scheme();
        for (x, d) in [(2.0, 0.9), (1.5, -0.6), (4.0, 1.8)] {
            let mut forward = MemristorDevice::default_ideal();
            run_cycle(&mut forward, &proto, x, d, &sx, &sd, true).unwrap();

            // Depression first, then potentiation.
            let mut reversed = MemristorDevice::default_ideal();
            let x_count = encode_pulses(x, &sx).unwrap().count;
            let d_enc = encode_pulses(d, &sd).unwrap();
            let d_neg = d_enc.polarity == Polarity::Negative;
            let (pot_d, dep_d) = if d_neg {
                (d_enc.count, 0)
            } else {
                (0, d_enc.count)
            };
            run_phase(
                &mut reversed,
                &proto,
                &PulseTrain::new(x_count, Polarity::Negative, Phase::Depression),
                &PulseTrain::new(dep_d, Polarity::Positive, Phase::Depression),
                Phase::Depression,
            )
            .unwrap();
            run_phase(
                &mut reversed,
                &proto,
                &PulseTrain::new(x_count, Polarity::Positive, Phase::Potentiation),
                &PulseTrain::new(pot_d, Polarity::Negative, Phase::Potentiation),
                Phase::Potentiation,
            )
            .unwrap();
            assert!((forward.conductance() - reversed.conductance()).abs() < 1e-12);
        }
    }

    #[test]
    fn conductance_saturates_at_bounds() {
        let mut dev = MemristorDevice::new(0.999, 1.0, -1.0, 1e-3, 0.0, 1.0).unwrap();
        let mut rng = SeededRng::new(4);
        for _ in 0..5000 {
            let u = rng.uniform(-2.5, 2.5);
            dev.apply_voltage(u);
            assert!((0.0..=1.0).contains(&dev.conductance()));
        }
        // Drive hard into both rails.
        for _ in 0..2000 {
            dev.apply_voltage(2.0);
        }
        assert_eq!(dev.conductance(), 1.0);
        for _ in 0..5000 {
            dev.apply_voltage(-2.0);
        }
        assert_eq!(dev.conductance(), 0.0);
    }
}
