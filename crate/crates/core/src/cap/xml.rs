//! CAP 1.1 wire format.

use std::fmt::Write as _;

use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::{BytesStart, Event};
use quick_xml::name::ResolveResult;
use quick_xml::NsReader;

use super::{
    CapAlert, CapArea, CapError, CapInfo, CapParameter, CapSeverity, CapTime, Category, Certainty, MsgType,
    ResponseType, Scope, Status, Urgency, CAP_NAMESPACE,
};

/// Minimal element tree; attributes other than namespace declarations carry
/// no CAP data.
#[derive(Debug, Default)]
struct Node {
    name: String,
    namespace: Option<Vec<u8>>,
    text: String,
    children: Vec<Node>,
}

impl Node {
    fn child(&self, name: &str) -> Option<&Node> {
        self.children.iter().find(|c| c.name == name)
    }

    fn children<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    fn required(&self, name: &str) -> Result<&Node, CapError> {
        self.child(name)
            .ok_or_else(|| CapError::schema(name, format!("missing inside <{}>", self.name)))
    }

    fn required_token(&self, name: &str) -> Result<&str, CapError> {
        let text = self.required(name)?.text.trim();
        if text.is_empty() {
            return Err(CapError::schema(name, "empty"));
        }
        Ok(text)
    }

    fn optional_text(&self, name: &str) -> Option<String> {
        self.child(name).map(|c| c.text.clone())
    }
}

fn malformed(e: impl std::fmt::Display) -> CapError {
    CapError::MalformedXml(e.to_string())
}

fn start_node(e: &BytesStart<'_>, ns: ResolveResult<'_>) -> Result<Node, CapError> {
    let name = std::str::from_utf8(e.local_name().into_inner()).map_err(malformed)?;
    Ok(Node {
        name: name.to_string(),
        namespace: match ns {
            ResolveResult::Bound(n) => Some(n.into_inner().to_vec()),
            _ => None,
        },
        ..Node::default()
    })
}

fn read_tree(bytes: &[u8]) -> Result<Node, CapError> {
    let mut reader = NsReader::from_reader(bytes);
    let mut stack: Vec<Node> = Vec::new();
    let mut root: Option<Node> = None;
    let mut buf = Vec::new();

    fn attach(stack: &mut [Node], root: &mut Option<Node>, node: Node) -> Result<(), CapError> {
        match stack.last_mut() {
            Some(parent) => parent.children.push(node),
            None if root.is_none() => *root = Some(node),
            None => return Err(malformed("more than one root element")),
        }
        Ok(())
    }

    loop {
        let (ns, event) = reader.read_resolved_event_into(&mut buf).map_err(malformed)?;
        match event {
            Event::Start(e) => {
                let node = start_node(&e, ns)?;
                stack.push(node);
            }
            Event::Empty(e) => {
                let node = start_node(&e, ns)?;
                attach(&mut stack, &mut root, node)?;
            }
            Event::End(_) => {
                let node = stack.pop().ok_or_else(|| malformed("unbalanced end tag"))?;
                attach(&mut stack, &mut root, node)?;
            }
            Event::Text(t) => {
                let text = t.xml10_content().map_err(malformed)?;
                match stack.last_mut() {
                    Some(top) => top.text.push_str(&text),
                    None if text.trim().is_empty() => {}
                    None => return Err(malformed("text outside the root element")),
                }
            }
            Event::CData(c) => {
                let text = c.decode().map_err(malformed)?;
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&text);
                }
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref().map_err(malformed)? {
                    Some(ch) => ch.to_string(),
                    None => {
                        let name = r.decode().map_err(malformed)?;
                        resolve_predefined_entity(&name)
                            .ok_or_else(|| malformed(format!("unknown entity &{name};")))?
                            .to_string()
                    }
                };
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&resolved);
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    if !stack.is_empty() {
        return Err(malformed("unexpected end of document"));
    }
    root.ok_or_else(|| malformed("no root element"))
}

fn enum_field<T>(node: &Node, name: &str, parse: fn(&str) -> Option<T>) -> Result<T, CapError> {
    let text = node.required_token(name)?;
    parse(text).ok_or_else(|| CapError::schema(name, format!("illegal value {text:?}")))
}

fn time_field(node: &Node, name: &str) -> Result<CapTime, CapError> {
    let text = node.required_token(name)?;
    CapTime::parse(text).ok_or_else(|| CapError::schema(name, format!("bad date-time {text:?}")))
}

/// Reads a CAP 1.1 alert. Only the first `<info>` block is kept; parameters
/// keep their document order.
pub fn parse_cap(bytes: &[u8]) -> Result<CapAlert, CapError> {
    let root = read_tree(bytes)?;
    if root.name != "alert" {
        return Err(CapError::schema("alert", format!("root element is <{}>", root.name)));
    }
    if root.namespace.as_deref() != Some(CAP_NAMESPACE.as_bytes()) {
        return Err(CapError::schema("alert", format!("namespace must be {CAP_NAMESPACE}")));
    }

    let info_node = root.required("info")?;
    let parameters = info_node
        .children("parameter")
        .map(|p| {
            let value_name = p.required_token("valueName")?.to_string();
            let value = p.required("value")?.text.clone();
            Ok(CapParameter { value_name, value })
        })
        .collect::<Result<Vec<_>, CapError>>()?;
    let areas = info_node
        .children("area")
        .map(|a| CapArea {
            area_desc: a.child("areaDesc").map(|d| d.text.clone()).unwrap_or_default(),
            polygons: a.children("polygon").map(|p| p.text.trim().to_string()).collect(),
            circles: a.children("circle").map(|c| c.text.trim().to_string()).collect(),
        })
        .collect();

    let info = CapInfo {
        language: info_node.optional_text("language").map(|l| l.trim().to_string()),
        category: enum_field(info_node, "category", Category::parse)?,
        event: info_node.required("event")?.text.clone(),
        response_type: match info_node.child("responseType") {
            Some(_) => Some(enum_field(info_node, "responseType", ResponseType::parse)?),
            None => None,
        },
        urgency: enum_field(info_node, "urgency", Urgency::parse)?,
        severity: enum_field(info_node, "severity", CapSeverity::parse)?,
        certainty: enum_field(info_node, "certainty", Certainty::parse)?,
        effective: match info_node.child("effective") {
            Some(_) => Some(time_field(info_node, "effective")?),
            None => None,
        },
        parameters,
        areas,
    };

    Ok(CapAlert {
        identifier: root.required_token("identifier")?.to_string(),
        sender: root.required_token("sender")?.to_string(),
        sent: time_field(&root, "sent")?,
        status: enum_field(&root, "status", Status::parse)?,
        msg_type: enum_field(&root, "msgType", MsgType::parse)?,
        source: root.optional_text("source"),
        scope: enum_field(&root, "scope", Scope::parse)?,
        info,
    })
}

fn escape_text(element: &str, raw: &str) -> Result<String, CapError> {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            // A literal CR would be folded into LF by any conforming reader.
            '\r' => out.push_str("&#13;"),
            '\t' | '\n' => out.push(ch),
            c if (c as u32) < 0x20 || c == '\u{FFFE}' || c == '\u{FFFF}' => {
                return Err(CapError::InvariantViolation {
                    element: element.to_string(),
                    reason: format!("character U+{:04X} cannot appear in XML", c as u32),
                })
            }
            c => out.push(c),
        }
    }
    Ok(out)
}

struct XmlOut {
    buf: String,
}

impl XmlOut {
    fn leaf(&mut self, depth: usize, name: &str, value: &str) -> Result<(), CapError> {
        let escaped = escape_text(name, value)?;
        let _ = writeln!(self.buf, "{:indent$}<{name}>{escaped}</{name}>", "", indent = depth * 3);
        Ok(())
    }

    fn open(&mut self, depth: usize, name: &str) {
        let _ = writeln!(self.buf, "{:indent$}<{name}>", "", indent = depth * 3);
    }

    fn close(&mut self, depth: usize, name: &str) {
        let _ = writeln!(self.buf, "{:indent$}</{name}>", "", indent = depth * 3);
    }
}

fn non_empty(element: &str, value: &str) -> Result<(), CapError> {
    if value.trim().is_empty() {
        return Err(CapError::InvariantViolation {
            element: element.to_string(),
            reason: "must not be empty".to_string(),
        });
    }
    Ok(())
}

/// Writes an alert as UTF-8 CAP 1.1 XML with the conventional element order
/// and three-space indentation.
pub fn serialize_cap(alert: &CapAlert) -> Result<Vec<u8>, CapError> {
    non_empty("identifier", &alert.identifier)?;
    non_empty("sender", &alert.sender)?;

    let mut out = XmlOut {
        buf: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"),
    };
    let _ = writeln!(out.buf, "<alert xmlns=\"{CAP_NAMESPACE}\">");
    out.leaf(1, "identifier", &alert.identifier)?;
    out.leaf(1, "sender", &alert.sender)?;
    out.leaf(1, "sent", alert.sent.as_str())?;
    out.leaf(1, "status", alert.status.as_str())?;
    out.leaf(1, "msgType", alert.msg_type.as_str())?;
    if let Some(source) = &alert.source {
        out.leaf(1, "source", source)?;
    }
    out.leaf(1, "scope", alert.scope.as_str())?;

    let info = &alert.info;
    out.open(1, "info");
    if let Some(language) = &info.language {
        out.leaf(2, "language", language)?;
    }
    out.leaf(2, "category", info.category.as_str())?;
    out.leaf(2, "event", &info.event)?;
    if let Some(rt) = info.response_type {
        out.leaf(2, "responseType", rt.as_str())?;
    }
    out.leaf(2, "urgency", info.urgency.as_str())?;
    out.leaf(2, "severity", info.severity.as_str())?;
    out.leaf(2, "certainty", info.certainty.as_str())?;
    if let Some(effective) = &info.effective {
        out.leaf(2, "effective", effective.as_str())?;
    }
    for p in &info.parameters {
        non_empty("valueName", &p.value_name)?;
        out.open(2, "parameter");
        out.leaf(3, "valueName", &p.value_name)?;
        out.leaf(3, "value", &p.value)?;
        out.close(2, "parameter");
    }
    for area in &info.areas {
        out.open(2, "area");
        out.leaf(3, "areaDesc", &area.area_desc)?;
        for polygon in &area.polygons {
            out.leaf(3, "polygon", polygon)?;
        }
        for circle in &area.circles {
            out.leaf(3, "circle", circle)?;
        }
        out.close(2, "area");
    }
    out.close(1, "info");
    out.buf.push_str("</alert>\n");
    Ok(out.buf.into_bytes())
}
