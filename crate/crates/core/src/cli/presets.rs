// SPDX-License-Identifier: Apache-2.0

//! Scenario builders for the reproduction experiments.

use crate::dataplane::{FieldMatch, StreamAction, StreamKey, StreamTableEntry};
use crate::engine::{DelayModels, EgressMode, GsiConfig, PriorityDist, Scenario, SourceSpec, TraceOptions};
use crate::schedule::{Gcl, GsiMode};
use crate::timing::DelayModel;

pub const TESTBED_ENTRY_NS: u64 = 50_000;
pub const TESTBED_ENTRIES: usize = 8;
pub const TESTBED_GSI_NS: u64 = 30;
pub const TESTBED_RATE_PPS: u64 = 514_000_000;
pub const FRAME_SIZE: u32 = 64;
pub const DETNET_S_LABEL: u32 = 100;
pub const DETNET_VLAN: u16 = 10;

/// Desk-scale simulated time of every preset.
pub const SCALED_NS: u64 = 100_000_000;
/// Simulated time of the long measurement campaigns.
pub const FULL_NS: u64 = 60_000_000_000;

/// Eight 50 µs entries each opening one queue, separated by `gsi` ns of
/// closed gates and saturated with 64 B DetNet
/// frames of uniformly random priority at 514 Mpps over 400 Gb/s.
pub fn testbed(gsi: u64, seed: u64) -> Scenario {
    let mut s = Scenario::new("testbed", Gcl::rotation(0, TESTBED_ENTRIES, TESTBED_ENTRY_NS));
    s.gsi = GsiConfig { duration: gsi, mode: GsiMode::ExtendPeriod };
    s.sources = vec![SourceSpec {
        eth_dst: 0x0200_0000_0001,
        ..SourceSpec::constant(TESTBED_RATE_PPS, FRAME_SIZE, PriorityDist::Uniform).with_mpls(DETNET_S_LABEL, vec![16])
    }];
    s.streams = detnet_streams();
    s.seed = seed;
    s.duration = SCALED_NS;
    s
}

/// S-Label to VLAN translation keeping the traffic class, then stream
/// identification on destination address and VLAN.
pub fn detnet_streams() -> Vec<StreamTableEntry> {
    vec![
        StreamTableEntry {
            key: StreamKey { s_label: FieldMatch::exact(DETNET_S_LABEL as u64), ..Default::default() },
            action: StreamAction::Translate { vlan_id: DETNET_VLAN, priority: None },
        },
        StreamTableEntry {
            key: StreamKey {
                eth_dst: FieldMatch::exact(0x0200_0000_0001),
                vlan_id: FieldMatch::exact(DETNET_VLAN as u64),
                ..Default::default()
            },
            action: StreamAction::Identify { handle: 1, sgcl_id: None, priority: None },
        },
    ]
}

/// Eight 10 µs entries with a trickle of frames per priority, so every
/// opening finds a filled queue and an idle link.
pub fn queue_delay(seed: u64) -> Scenario {
    let mut s = Scenario::new("queue-delay", Gcl::rotation(0, TESTBED_ENTRIES, 10_000));
    s.sources = (0..8).map(|p| SourceSpec::constant(1_000_000, FRAME_SIZE, PriorityDist::Fixed(p))).collect();
    s.seed = seed;
    s.duration = SCALED_NS;
    s
}

/// Control plane only, recording every control frame.
pub fn control_delay(seed: u64) -> Scenario {
    let mut s = Scenario::new("control-delay", Gcl::rotation(0, TESTBED_ENTRIES, TESTBED_ENTRY_NS));
    s.trace = TraceOptions { control_frames: true, ..Default::default() };
    s.seed = seed;
    s.duration = SCALED_NS;
    s
}

/// Control plane only, for period-completion accuracy.
pub fn tg_accuracy(seed: u64) -> Scenario {
    let mut s = Scenario::new("tg-accuracy", Gcl::rotation(0, TESTBED_ENTRIES, TESTBED_ENTRY_NS));
    s.seed = seed;
    s.duration = SCALED_NS;
    s
}

/// Number of completions the traffic-generator campaign collects.
pub const TG_FULL_COMPLETIONS: u64 = 16_000;

/// Every delay known in advance: each period ends 11 ns early, control
/// frames are 9 ns apart and queue delays replay a fixed sequence. Queues
/// stay backlogged, so every entry's received run spans its whole window.
pub fn scripted_boundaries(seed: u64) -> Scenario {
    let mut s = Scenario::new("scripted-boundaries", Gcl::rotation(0, TESTBED_ENTRIES, TESTBED_ENTRY_NS));
    s.gsi = GsiConfig { duration: TESTBED_GSI_NS, mode: GsiMode::ExtendPeriod };
    s.delays = DelayModels {
        tg: DelayModel::Scripted(vec![-11]),
        queue: DelayModel::Scripted(SCRIPTED_QUEUE.to_vec()),
        control: DelayModel::Constant(9),
    };
    s.sources = (0..8).map(|p| SourceSpec::backlogged(p, 64, FRAME_SIZE)).collect();
    s.trace = TraceOptions { egress: EgressMode::Runs, ..Default::default() };
    s.seed = seed;
    s.duration = SCALED_NS;
    s
}

/// Queue-delay replay sequence of [`scripted_boundaries`]. Writes alternate
/// open and close, starting with an open; an open is never more than 7 ns
/// faster than the close before it, so an entry never starts while the
/// previous one's last frame is still on the wire.
pub const SCRIPTED_QUEUE: [i64; 12] = [1, 14, 9, 63, 57, 5, 27, 2, 41, 11, 18, 3];
