//! Explanation templates: literal text with `{{device.<id>.<prop>}}` and
//! `{{context.<name>}}` placeholders.

use super::condition::Operand;

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Text(String),
    /// Always a `Device` or `Context` operand.
    Ref(Operand),
}

/// Splits a template into text and placeholder segments.
pub fn parse_template(template: &str) -> Result<Vec<Segment>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        if open > 0 {
            out.push(Segment::Text(rest[..open].to_string()));
        }
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| format!("unterminated placeholder `{{{{{after}`"))?;
        let inner = after[..close].trim();
        let parts: Vec<&str> = inner.split('.').collect();
        let operand = match parts.as_slice() {
            ["device", d, p] if !d.is_empty() && !p.is_empty() => Operand::Device {
                device_id: d.to_string(),
                property: p.to_string(),
            },
            ["context", n] if !n.is_empty() => Operand::Context(n.to_string()),
            _ => {
                return Err(format!(
                    "placeholder `{{{{{inner}}}}}` must be device.<id>.<property> or context.<name>"
                ))
            }
        };
        out.push(Segment::Ref(operand));
        rest = &after[close + 2..];
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_placeholders() {
        let segs = parse_template("Outside it is {{ context.outside_temp }}°C, heater {{device.heater.power}}.")
            .unwrap();
        assert_eq!(
            segs,
            vec![
                Segment::Text("Outside it is ".into()),
                Segment::Ref(Operand::Context("outside_temp".into())),
                Segment::Text("°C, heater ".into()),
                Segment::Ref(Operand::Device { device_id: "heater".into(), property: "power".into() }),
                Segment::Text(".".into()),
            ]
        );
    }

    #[test]
    fn plain_text_is_one_segment() {
        assert_eq!(parse_template("no refs").unwrap(), vec![Segment::Text("no refs".into())]);
        assert!(parse_template("").unwrap().is_empty());
    }

    #[test]
    fn malformed_placeholders() {
        assert!(parse_template("a {{context.x").is_err());
        assert!(parse_template("a {{heater}}").is_err());
        assert!(parse_template("a {{device.heater}}").is_err());
    }
}
