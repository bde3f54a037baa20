//! Shaped directed links between layers.

use crate::rational::NANOS_PER_SEC;
use crate::rng::SplitMix64;
use crate::spec::{Bandwidth, NetworkRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transit {
    Delivered(u64),
    Dropped,
}

/// `ceil(size_bits * 1e9 / bandwidth)`, zero for unlimited links.
pub fn serialization_ns(size_bits: u64, bandwidth: Bandwidth) -> u64 {
    match bandwidth {
        Bandwidth::Unlimited => 0,
        Bandwidth::BitsPerSecond(bps) => {
            let ns = (u128::from(size_bits) * u128::from(NANOS_PER_SEC)).div_ceil(u128::from(bps));
            u64::try_from(ns).unwrap_or(u64::MAX)
        }
    }
}

/// One directed layer pair with its own serialization pipe and rng stream.
#[derive(Debug, Clone)]
pub struct Link {
    pub src_layer: String,
    pub dst_layer: String,
    pub rule: NetworkRule,
    rng: SplitMix64,
    busy_until_ns: u64,
}

impl Link {
    pub fn new(src_layer: &str, dst_layer: &str, rule: NetworkRule, master_seed: u64, repetition: u64) -> Self {
        Self {
            src_layer: src_layer.to_string(),
            dst_layer: dst_layer.to_string(),
            rule,
            rng: SplitMix64::for_role(master_seed, "link", &[src_layer, dst_layer], repetition),
            busy_until_ns: 0,
        }
    }

    pub fn busy_until_ns(&self) -> u64 {
        self.busy_until_ns
    }

    pub fn rng_draws(&self) -> u64 {
        self.rng.draws()
    }

    /// Pushes one message through the link.
    ///
    /// Every call consumes one draw for the loss decision. Delivered messages
    /// occupy the pipe for their serialization time and, when the rule has
    /// jitter, consume a second draw for a uniform extra delay in
    /// `[0, jitter_ns]`.
    pub fn transit(&mut self, size_bits: u64, send_at_ns: u64) -> Transit {
        if self.rng.chance(&self.rule.loss_rate) {
            return Transit::Dropped;
        }
        let serialization = serialization_ns(size_bits, self.rule.bandwidth);
        let start = send_at_ns.max(self.busy_until_ns);
        self.busy_until_ns = start + serialization;
        let jitter = if self.rule.jitter_ns > 0 {
            self.rng.up_to(self.rule.jitter_ns)
        } else {
            0
        };
        Transit::Delivered(start + serialization + self.rule.delay_ns + jitter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;

    fn rule(delay_ns: u64, bps: Option<u64>, jitter_ns: u64, loss: Rational) -> NetworkRule {
        NetworkRule {
            src_layer: "edge".into(),
            dst_layer: "cloud".into(),
            delay_ns,
            jitter_ns,
            bandwidth: bps.map_or(Bandwidth::Unlimited, Bandwidth::BitsPerSecond),
            loss_rate: loss,
            symmetric: false,
        }
    }

    fn link(r: NetworkRule) -> Link {
        Link::new("edge", "cloud", r, 7, 0)
    }

    #[test]
    fn identity_link_delivers_immediately() {
        let mut l = link(rule(0, None, 0, Rational::from_integer(0)));
        assert_eq!(l.transit(12_345, 77), Transit::Delivered(77));
        assert_eq!(l.rng_draws(), 1);
    }

    #[test]
    fn serialization_plus_delay() {
        let mut l = link(rule(10_000_000, Some(1_000_000), 0, Rational::from_integer(0)));
        assert_eq!(l.transit(1_000_000, 0), Transit::Delivered(1_010_000_000));
    }

    #[test]
    fn pipe_occupancy_serializes_back_to_back_sends() {
        let mut l = link(rule(10_000_000, Some(1_000_000), 0, Rational::from_integer(0)));
        assert_eq!(l.transit(1_000_000, 0), Transit::Delivered(1_010_000_000));
        assert_eq!(l.transit(1_000_000, 0), Transit::Delivered(2_010_000_000));
        assert_eq!(l.busy_until_ns(), 2_000_000_000);
        // an idle gap resets to the send time
        assert_eq!(l.transit(1_000_000, 5_000_000_000), Transit::Delivered(6_010_000_000));
    }

    #[test]
    fn total_loss_always_drops() {
        let mut l = link(rule(0, None, 5, Rational::from_integer(1)));
        for t in 0..100 {
            assert_eq!(l.transit(8, t), Transit::Dropped);
        }
        assert_eq!(l.rng_draws(), 100);
    }

    #[test]
    fn jitter_is_bounded_and_consumes_a_second_draw() {
        let mut l = link(rule(100, None, 50, Rational::from_integer(0)));
        for _ in 0..200 {
            match l.transit(1, 0) {
                Transit::Delivered(t) => assert!((100..=150).contains(&t)),
                Transit::Dropped => panic!("no loss configured"),
            }
        }
        assert_eq!(l.rng_draws(), 400);
    }

    #[test]
    fn serialization_rounds_up() {
        assert_eq!(serialization_ns(1, Bandwidth::BitsPerSecond(3)), 333_333_334);
        assert_eq!(serialization_ns(3, Bandwidth::BitsPerSecond(3)), 1_000_000_000);
    }
}
