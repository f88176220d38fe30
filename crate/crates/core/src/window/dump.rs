use std::fmt::Write;

use super::{TemporalGraph, WindowSnapshot};

/// Canonical text form of one window; see `docs/graph-format.md`.
pub fn dump_snapshot(s: &WindowSnapshot) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "window {} start={:?} end={:?} ips={} flows={}",
        s.window_index,
        s.window_start,
        s.window_end,
        s.ip_nodes.len(),
        s.flow_nodes.len()
    );
    for (i, ip) in s.ip_nodes.iter().enumerate() {
        let _ = writeln!(out, "  ip {i} {ip}");
    }
    for (i, f) in s.flow_nodes.iter().enumerate() {
        let label = f.label.map_or("-".to_string(), |l| l.to_string());
        let _ = writeln!(
            out,
            "  flow {i} id={} ordinal={} src={} dst={} label={label}",
            f.flow_id, f.ordinal, f.src_ip, f.dst_ip
        );
    }
    let lists: [(&str, &[(usize, usize)]); 6] = [
        ("flow_to_src", &s.spatial.flow_to_src),
        ("src_to_flow", &s.spatial.src_to_flow),
        ("flow_to_dst", &s.spatial.flow_to_dst),
        ("dst_to_flow", &s.spatial.dst_to_flow),
        ("same_src", &s.intra_temporal.same_src),
        ("same_dst", &s.intra_temporal.same_dst),
    ];
    for (name, edges) in lists {
        let _ = write!(out, "  edges {name} {}", edges.len());
        for (a, b) in edges {
            let _ = write!(out, " {a}>{b}");
        }
        out.push('\n');
    }
    out
}

/// All windows of a temporal graph (oldest first) followed by the
/// inter-window edge lists.
pub fn dump_graph(g: &TemporalGraph) -> String {
    let mut out = format!(
        "graph target={} memory={} windows={}\n",
        g.target().window_index,
        g.window_memory,
        g.snapshots.len()
    );
    for s in &g.snapshots {
        out.push_str(&dump_snapshot(s));
    }
    for (name, edges) in [("inter_ip", &g.inter_ip_edges), ("inter_flow", &g.inter_flow_edges)] {
        let _ = write!(out, "edges {name} {}", edges.len());
        for e in edges {
            let _ = write!(out, " {}:{}>{}:{}", e.src_window, e.src_node, e.dst_window, e.dst_node);
        }
        out.push('\n');
    }
    out
}
