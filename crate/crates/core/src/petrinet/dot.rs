use std::fmt::Write as _;

use super::{Arc, Marking, PetriNet};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn place_node(net: &PetriNet, p: usize) -> String {
    quote(&format!("p:{}", net.places()[p].id))
}

fn transition_node(net: &PetriNet, t: usize) -> String {
    quote(&format!("t:{}", net.transitions()[t].id))
}

fn token_label(tokens: u32) -> String {
    match tokens {
        0 => String::new(),
        1..=4 => "\u{25CF}".repeat(tokens as usize),
        n => n.to_string(),
    }
}

/// Graphviz rendering: places are circles (source yellow, sink green),
/// visible transitions are boxes labelled by event, hidden transitions are
/// small black boxes. Tokens of `marking` are drawn inside the places.
pub fn to_dot(net: &PetriNet, marking: Option<&Marking>) -> String {
    let mut out = String::from("digraph petrinet {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [fontname=\"Helvetica\", fontsize=10];\n");
    for (p, place) in net.places().iter().enumerate() {
        let tokens = marking.map_or(0, |m| m.get(p));
        let fill = if p == net.source() {
            ", style=filled, fillcolor=yellow"
        } else if p == net.sink() {
            ", style=filled, fillcolor=green"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  {} [shape=circle, fixedsize=true, width=0.4, label={}, xlabel={}{fill}];",
            place_node(net, p),
            quote(&token_label(tokens)),
            quote(&place.id),
        );
    }
    for (t, transition) in net.transitions().iter().enumerate() {
        match &transition.label {
            Some(label) => {
                let _ = writeln!(
                    out,
                    "  {} [shape=box, label={}];",
                    transition_node(net, t),
                    quote(label)
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "  {} [shape=box, style=filled, fillcolor=black, width=0.15, height=0.4, label=\"\"];",
                    transition_node(net, t)
                );
            }
        }
    }
    for arc in net.arcs() {
        let (from, to) = match *arc {
            Arc::Input {
                place, transition, ..
            } => (place_node(net, place), transition_node(net, transition)),
            Arc::Output {
                transition, place, ..
            } => (transition_node(net, transition), place_node(net, place)),
        };
        if arc.weight() == 1 {
            let _ = writeln!(out, "  {from} -> {to};");
        } else {
            let _ = writeln!(out, "  {from} -> {to} [label=\"{}\"];", arc.weight());
        }
    }
    out.push_str("}\n");
    out
}
