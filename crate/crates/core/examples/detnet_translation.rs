// SPDX-License-Identifier: Apache-2.0

//! DetNet frames entering and leaving the TSN domain.

use smallvec::smallvec;
use tas_sim::dataplane::{
    identify_stream, translate_detnet_to_tsn, translate_tsn_to_detnet, Frame, MissPolicy, MplsStack, StreamTable,
};
use tas_sim::cli::presets;

fn main() {
    let mut table = StreamTable::default();
    for e in presets::detnet_streams() {
        table.insert(e).unwrap();
    }
    for (s_label, tc) in [(presets::DETNET_S_LABEL, 5), (999, 3)] {
        let mut f = Frame::data(1, 0, 64);
        f.eth_dst = 0x0200_0000_0001;
        f.mpls = Some(MplsStack { f_labels: smallvec![16], s_label, tc, dcw_seq: 42 });
        let tsn = translate_detnet_to_tsn(&f, &table).unwrap();
        let tagged = identify_stream(&tsn, &table);
        println!("S-Label {s_label} TC {tc}: vlan {:?}, stream {:?}, queue {}", tsn.vlan, tagged.stream, tagged.priority());
        println!("  restored unchanged: {}", translate_tsn_to_detnet(&tsn) == f);
    }
    table.miss_policy = MissPolicy::Drop;
    let mut f = Frame::data(2, 0, 64);
    f.mpls = Some(MplsStack { f_labels: smallvec![], s_label: 999, tc: 0, dcw_seq: 0 });
    println!("unknown S-Label under the drop policy: {:?}", translate_detnet_to_tsn(&f, &table).map(|f| f.vlan));
}
