//! Channel gains, SINR, rates and transmission times on both hops.
//!
//! Rates are in bits per millisecond and times in milliseconds, so a
//! transmission fits a slot when its time is at most `slot_ms`.

use serde::{Deserialize, Serialize};

use crate::kinematics::Pose;
use crate::scenario::SicPowerIndex;

/// Line-of-sight gain `beta0 / d^2` between two nodes.
///
/// For a ground device below a UAV at altitude `h` this is
/// `beta0 / (h^2 + dx^2 + dy^2)`.
pub fn access_gain(rx: &Pose, tx: &Pose, beta0: f64) -> f64 {
    beta0 / rx.distance_sq(tx)
}

/// Shannon rate `B log2(1 + snr)` in bits per millisecond.
pub fn shannon_rate(bandwidth_hz: f64, snr: f64) -> f64 {
    // ln_1p keeps full precision at low SNR.
    bandwidth_hz / 1000.0 * (snr.ln_1p() / std::f64::consts::LN_2)
}

/// Access-hop rate of a device transmitting at `rho` over one subcarrier.
pub fn access_rate(gain: f64, rho: f64, noise_power: f64, bandwidth_hz: f64) -> f64 {
    shannon_rate(bandwidth_hz, rho * gain / noise_power)
}

/// Time to push `bits` at `rate`; zero when nothing is sent and infinite
/// when the rate is zero.
pub fn transmit_time(bits: f64, rate: f64) -> f64 {
    if bits == 0.0 {
        0.0
    } else if rate > 0.0 {
        bits / rate
    } else {
        f64::INFINITY
    }
}

/// Upload time of a task of `bits` when `scheduled`.
pub fn upload_time(bits: u64, scheduled: bool, rate: f64) -> f64 {
    if scheduled {
        transmit_time(bits as f64, rate)
    } else {
        0.0
    }
}

/// Whether a transmission or computation of `time_ms` completes within one slot.
pub fn fits_slot(time_ms: f64, slot_ms: f64) -> bool {
    time_ms <= slot_ms
}

/// UAV-to-BS subcarrier allocation, powers and channel magnitudes for one
/// slot, all indexed `[uav][subcarrier]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackhaulAssignment {
    pub zeta: Vec<Vec<bool>>,
    pub power: Vec<Vec<f64>>,
    /// `|h|^2`, linear.
    pub gain: Vec<Vec<f64>>,
}

impl BackhaulAssignment {
    /// Nothing allocated, with the given channel magnitudes.
    pub fn idle(gain: Vec<Vec<f64>>) -> Self {
        let zeta = gain.iter().map(|row| vec![false; row.len()]).collect();
        let power = gain.iter().map(|row| vec![0.0; row.len()]).collect();
        Self { zeta, power, gain }
    }

    pub fn uavs(&self) -> usize {
        self.gain.len()
    }

    pub fn subcarriers(&self) -> usize {
        self.gain.first().map_or(0, Vec::len)
    }

    /// UAVs sharing subcarrier `l`.
    pub fn occupants(&self, l: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.uavs()).filter(move |&m| self.zeta[m][l])
    }

    /// Whether `a` is decoded before `b` on subcarrier `l`: larger `|h|^2`
    /// first, the lower index first on a tie.
    pub fn decoded_before(&self, a: usize, b: usize, l: usize) -> bool {
        let (ga, gb) = (self.gain[a][l], self.gain[b][l]);
        ga > gb || (ga == gb && a < b)
    }

    /// Co-scheduled UAVs whose signal is still present when `m` is decoded
    /// on `l`: those decoded after it. Empty when `m` is not on `l`.
    pub fn interferers(&self, m: usize, l: usize) -> Vec<usize> {
        if !self.zeta[m][l] {
            return Vec::new();
        }
        self.occupants(l)
            .filter(|&o| o != m && self.decoded_before(m, o, l))
            .collect()
    }

    /// Interference power seen by `m` on `l`.
    pub fn interference(&self, m: usize, l: usize, sic: SicPowerIndex) -> f64 {
        self.interferers(m, l)
            .into_iter()
            .map(|o| match sic {
                SicPowerIndex::Interferer => self.gain[o][l] * self.power[o][l],
                SicPowerIndex::Literal => self.gain[o][l] * self.power[m][l],
            })
            .sum()
    }

    /// Total transmit power of UAV `m`.
    pub fn power_used(&self, m: usize) -> f64 {
        (0..self.subcarriers())
            .filter(|&l| self.zeta[m][l])
            .map(|l| self.power[m][l])
            .sum()
    }

    /// Whether `m` holds any backhaul subcarrier.
    pub fn transmits(&self, m: usize) -> bool {
        self.zeta[m].iter().any(|&z| z)
    }
}

/// SINR of UAV `m` on subcarrier `l` under successive interference
/// cancellation.
pub fn backhaul_sinr(a: &BackhaulAssignment, m: usize, l: usize, noise_power: f64, sic: SicPowerIndex) -> f64 {
    if !a.zeta[m][l] {
        return 0.0;
    }
    a.gain[m][l] * a.power[m][l] / (a.interference(m, l, sic) + noise_power)
}

/// Sum rate of UAV `m` over all backhaul subcarriers, in bits per millisecond.
pub fn backhaul_sum_rate(
    a: &BackhaulAssignment,
    m: usize,
    noise_power: f64,
    bandwidth_hz: f64,
    sic: SicPowerIndex,
) -> f64 {
    (0..a.subcarriers())
        .map(|l| shannon_rate(bandwidth_hz, backhaul_sinr(a, m, l, noise_power, sic)))
        .sum()
}

/// Time for a UAV to forward residual payloads totalling `bits` at sum rate `rate`.
pub fn backhaul_time(bits: u64, rate: f64) -> f64 {
    transmit_time(bits as f64, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SIC: SicPowerIndex = SicPowerIndex::Interferer;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn gain_examples() {
        let uav = Pose::new(50.0, 50.0, 100.0);
        assert!(close(access_gain(&uav, &Pose::new(50.0, 50.0, 0.0), 1e-5), 1e-9));
        let uav = Pose::new(0.0, 0.0, 1.0);
        assert!(close(access_gain(&uav, &Pose::new(1.0, 0.0, 0.0), 1.0), 0.5));
        let near = access_gain(&uav, &Pose::new(3.0, 0.0, 0.0), 1.0);
        let far = access_gain(&uav, &Pose::new(6.0, 0.0, 0.0), 1.0);
        assert!(far < near);
    }

    #[test]
    fn rate_examples() {
        // B = 1000 Hz gives 1 bit per ms per bit/s/Hz.
        assert!(close(access_rate(1.0, 1.0, 1.0, 1000.0), 1.0));
        assert!(close(access_rate(3.0, 1.0, 1.0, 1000.0), 2.0));
        assert_eq!(access_rate(1.0, 0.0, 1.0, 1000.0), 0.0);
    }

    #[test]
    fn upload_examples() {
        let t = upload_time(160_000, true, 200_000.0);
        assert!(close(t, 0.8) && fits_slot(t, 1.0));
        assert_eq!(upload_time(160_000, false, 0.0), 0.0);
        let t = upload_time(160_000, true, 100_000.0);
        assert!(close(t, 1.6) && !fits_slot(t, 1.0));
        assert!(!fits_slot(upload_time(1, true, 0.0), 1.0));
    }

    fn two_on_one(g1: f64, g2: f64) -> BackhaulAssignment {
        BackhaulAssignment {
            zeta: vec![vec![true], vec![true]],
            power: vec![vec![1.0], vec![1.0]],
            gain: vec![vec![g1], vec![g2]],
        }
    }

    #[test]
    fn sinr_examples() {
        let a = two_on_one(2.0, 1.0);
        assert!(close(backhaul_sinr(&a, 0, 0, 1.0, SIC), 1.0));
        assert!(close(backhaul_sinr(&a, 1, 0, 1.0, SIC), 1.0));

        let mut solo = a.clone();
        solo.zeta[1][0] = false;
        assert!(close(backhaul_sinr(&solo, 0, 0, 1.0, SIC), 2.0));
        assert_eq!(backhaul_sinr(&solo, 1, 0, 1.0, SIC), 0.0);
    }

    #[test]
    fn sic_tie_goes_to_lower_index() {
        let a = two_on_one(1.0, 1.0);
        assert_eq!(a.interferers(0, 0), vec![1]);
        assert!(a.interferers(1, 0).is_empty());
    }

    #[test]
    fn literal_power_index() {
        let mut a = two_on_one(2.0, 1.0);
        a.power[0][0] = 3.0;
        // Interferer reading uses UAV 1's own power, literal reading UAV 0's.
        assert!(close(a.interference(0, 0, SicPowerIndex::Interferer), 1.0));
        assert!(close(a.interference(0, 0, SicPowerIndex::Literal), 3.0));
    }

    #[test]
    fn sum_rate_examples() {
        let a = BackhaulAssignment {
            zeta: vec![vec![true, true]],
            power: vec![vec![1.0, 3.0]],
            gain: vec![vec![1.0, 1.0]],
        };
        assert!(close(backhaul_sum_rate(&a, 0, 1.0, 1000.0, SIC), 3.0));
        let idle = BackhaulAssignment::idle(vec![vec![1.0, 1.0]]);
        assert_eq!(backhaul_sum_rate(&idle, 0, 1.0, 1000.0, SIC), 0.0);
        let one = BackhaulAssignment {
            zeta: vec![vec![true]],
            power: vec![vec![1.0]],
            gain: vec![vec![1.0]],
        };
        assert!(close(backhaul_sum_rate(&one, 0, 1.0, 1000.0, SIC), 1.0));
    }

    #[test]
    fn backhaul_time_examples() {
        let t = backhaul_time(80_000, 100_000.0);
        assert!(close(t, 0.8) && fits_slot(t, 1.0));
        assert_eq!(backhaul_time(0, 0.0), 0.0);
        let t = backhaul_time(160_000, 100_000.0);
        assert!(close(t, 1.6) && !fits_slot(t, 1.0));
        assert_eq!(backhaul_time(1, 0.0), f64::INFINITY);
    }

    fn arb_assignment() -> impl Strategy<Value = BackhaulAssignment> {
        (1usize..5, 1usize..4).prop_flat_map(|(m, l)| {
            (
                prop::collection::vec(prop::collection::vec(any::<bool>(), l), m),
                prop::collection::vec(prop::collection::vec(0.0..2.0f64, l), m),
                prop::collection::vec(prop::collection::vec(prop::sample::select(vec![0.5, 1.0, 2.0, 3.7]), l), m),
            )
                .prop_map(|(zeta, power, gain)| BackhaulAssignment { zeta, power, gain })
        })
    }

    proptest! {
        #[test]
        fn strongest_hears_all_weakest_hears_none(a in arb_assignment()) {
            for l in 0..a.subcarriers() {
                let mut on: Vec<usize> = a.occupants(l).collect();
                if on.is_empty() { continue; }
                on.sort_by(|&x, &y| {
                    a.gain[y][l].partial_cmp(&a.gain[x][l]).unwrap().then(x.cmp(&y))
                });
                let first = on[0];
                let last = *on.last().unwrap();
                prop_assert_eq!(a.interferers(first, l).len(), on.len() - 1);
                prop_assert!(a.interferers(last, l).is_empty());
            }
        }

        #[test]
        fn rate_monotone_in_own_power(a in arb_assignment(), bump in 0.0..1.0f64) {
            for m in 0..a.uavs() {
                let r0 = backhaul_sum_rate(&a, m, 0.1, 1000.0, SIC);
                prop_assert!(r0 >= 0.0);
                let mut b = a.clone();
                for p in b.power[m].iter_mut() { *p += bump; }
                prop_assert!(backhaul_sum_rate(&b, m, 0.1, 1000.0, SIC) >= r0);
            }
        }
    }
}
