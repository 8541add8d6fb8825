//! PNML subset: places (with optional initial marking), transitions (a
//! `<name>` makes them visible), arcs with optional `<inscription>` weight.
//!
//! Source and sink are written as `<toolspecific tool="careflow">` role
//! markers on the two places, plus a standard `<finalmarkings>` block. When
//! reading files from other tools, missing role markers fall back to the
//! final marking for the sink, the single initially marked place for the
//! source, and finally to the unique place without incoming (resp.
//! outgoing) arcs. Transitions carrying `activity="$invisible$"` tool data
//! are hidden even if named.

use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::{Arc, NetError, PetriNet, Result};

const TOOL: &str = "careflow";
const PTNET: &str = "http://www.pnml.org/version-2009/grammar/ptnet";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn to_pnml(net: &PetriNet) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n");
    let _ = writeln!(out, "  <net id=\"net\" type=\"{PTNET}\">");
    out.push_str("    <page id=\"page\">\n");
    for (i, place) in net.places().iter().enumerate() {
        let _ = writeln!(out, "      <place id=\"{}\">", escape(&place.id));
        let tokens = net.initial_marking().get(i);
        // an explicit zero keeps an empty marking from defaulting to the source
        if tokens > 0 || (i == net.source() && net.initial_marking().total() == 0) {
            let _ = writeln!(
                out,
                "        <initialMarking><text>{tokens}</text></initialMarking>"
            );
        }
        let role = if i == net.source() && i == net.sink() {
            Some("source sink")
        } else if i == net.source() {
            Some("source")
        } else if i == net.sink() {
            Some("sink")
        } else {
            None
        };
        if let Some(role) = role {
            let _ = writeln!(
                out,
                "        <toolspecific tool=\"{TOOL}\" version=\"1\"><role>{role}</role></toolspecific>"
            );
        }
        out.push_str("      </place>\n");
    }
    for t in net.transitions() {
        let _ = write!(out, "      <transition id=\"{}\">", escape(&t.id));
        if let Some(label) = &t.label {
            let _ = write!(out, "<name><text>{}</text></name>", escape(label));
        }
        out.push_str("</transition>\n");
    }
    for (i, arc) in net.arcs().iter().enumerate() {
        let (from, to) = match *arc {
            Arc::Input {
                place, transition, ..
            } => (&net.places()[place].id, &net.transitions()[transition].id),
            Arc::Output {
                transition, place, ..
            } => (&net.transitions()[transition].id, &net.places()[place].id),
        };
        let _ = write!(
            out,
            "      <arc id=\"a{i}\" source=\"{}\" target=\"{}\">",
            escape(from),
            escape(to)
        );
        if arc.weight() != 1 {
            let _ = write!(
                out,
                "<inscription><text>{}</text></inscription>",
                arc.weight()
            );
        }
        out.push_str("</arc>\n");
    }
    out.push_str("    </page>\n");
    let _ = writeln!(
        out,
        "    <finalmarkings><marking><place idref=\"{}\"><text>1</text></place></marking></finalmarkings>",
        escape(&net.places()[net.sink()].id)
    );
    out.push_str("  </net>\n</pnml>\n");
    out
}

fn err(msg: impl Into<String>) -> NetError {
    NetError::Pnml(msg.into())
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

/// Text of `<name><text>..</text></name>` style wrappers.
fn text_of(node: Node, wrapper: &str) -> Option<String> {
    child(node, wrapper)
        .and_then(|w| child(w, "text"))
        .map(|t| t.text().unwrap_or("").trim().to_string())
}

fn attr<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str> {
    node.attribute(name).ok_or_else(|| {
        err(format!(
            "<{}> at byte {} lacks `{name}`",
            node.tag_name().name(),
            node.range().start
        ))
    })
}

fn count(text: &str, what: &str) -> Result<u32> {
    text.parse()
        .map_err(|_| err(format!("{what} `{text}` is not a non-negative integer")))
}

fn has_role(node: Node, role: &str) -> bool {
    node.children()
        .filter(|c| c.has_tag_name("toolspecific") && c.attribute("tool") == Some(TOOL))
        .filter_map(|c| child(c, "role"))
        .any(|r| r.text().unwrap_or("").split_whitespace().any(|w| w == role))
}

fn is_invisible(node: Node) -> bool {
    node.children()
        .any(|c| c.has_tag_name("toolspecific") && c.attribute("activity") == Some("$invisible$"))
}

/// Net elements in document order, skipping marking blocks that reuse the
/// `place` tag.
fn collect<'a, 'i>(node: Node<'a, 'i>, out: &mut Vec<Node<'a, 'i>>) {
    for c in node.children().filter(Node::is_element) {
        match c.tag_name().name() {
            "finalmarkings" | "toolspecific" => {}
            "place" | "transition" | "arc" => out.push(c),
            _ => collect(c, out),
        }
    }
}

pub fn parse_pnml(input: &str) -> Result<PetriNet> {
    let doc = Document::parse(input).map_err(|e| err(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("pnml") {
        return Err(err(format!(
            "root element is <{}>, expected <pnml>",
            root.tag_name().name()
        )));
    }
    let net_node = child(root, "net").ok_or_else(|| err("missing <net>"))?;
    let mut elements = Vec::new();
    collect(net_node, &mut elements);

    let mut b = PetriNet::builder();
    let mut place_ids = Vec::new();
    let mut marked = Vec::new();
    let (mut source, mut sink) = (None, None);
    let mut arcs = Vec::new();
    for node in &elements {
        match node.tag_name().name() {
            "place" => {
                let id = attr(*node, "id")?.to_string();
                if let Some(text) = text_of(*node, "initialMarking") {
                    let n = count(&text, "initial marking")?;
                    b.tokens(id.clone(), n);
                    if n > 0 {
                        marked.push(id.clone());
                    }
                }
                if has_role(*node, "source") {
                    source = Some(id.clone());
                }
                if has_role(*node, "sink") {
                    sink = Some(id.clone());
                }
                b.place(id.clone());
                place_ids.push(id);
            }
            "transition" => {
                let id = attr(*node, "id")?.to_string();
                let label = if is_invisible(*node) {
                    None
                } else {
                    text_of(*node, "name")
                };
                b.transition(id, label);
            }
            _ => {
                let from = attr(*node, "source")?.to_string();
                let to = attr(*node, "target")?.to_string();
                let weight = match text_of(*node, "inscription") {
                    Some(text) => count(&text, "arc weight")?,
                    None => 1,
                };
                b.weighted_arc(from.clone(), to.clone(), weight);
                arcs.push((from, to));
            }
        }
    }

    if sink.is_none() {
        sink = net_node
            .descendants()
            .find(|n| n.has_tag_name("finalmarkings"))
            .and_then(|fm| fm.descendants().find(|n| n.has_tag_name("place")))
            .and_then(|p| p.attribute("idref"))
            .map(str::to_string);
    }
    if source.is_none() && marked.len() == 1 {
        source = marked.first().cloned();
    }
    let unique = |pred: &dyn Fn(&String) -> bool| {
        let found: Vec<&String> = place_ids.iter().filter(|p| pred(p)).collect();
        (found.len() == 1).then(|| found[0].clone())
    };
    if source.is_none() {
        source = unique(&|p| !arcs.iter().any(|(_, to)| to == p));
    }
    if sink.is_none() {
        sink = unique(&|p| !arcs.iter().any(|(from, _)| from == p));
    }
    if let Some(s) = source {
        b.source(s);
    }
    if let Some(s) = sink {
        b.sink(s);
    }
    b.build()
}
