//! Macro-string expansion for domain-spec arguments.

use std::fmt::Write;
use std::net::IpAddr;

use super::SessionInput;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MacroError {
    #[error("unknown macro letter '{0}'")]
    UnknownLetter(char),
    #[error("unterminated macro escape")]
    Unterminated,
    #[error("bad macro transformer '{0}'")]
    BadTransformer(String),
}

/// Expands `%{..}` escapes against a session: `%{s}` sender, `%{l}`
/// local-part, `%{o}` sender domain, `%{d}` current domain, `%{i}` client
/// IP in dotted form, `%{h}` HELO, `%{v}` address family tag. Digit and
/// `r` transformers plus custom delimiters apply per the usual rules;
/// `%%`, `%_` and `%-` are literal escapes.
pub fn expand_macros(
    template: &str,
    input: &SessionInput,
    domain: &str,
) -> Result<String, MacroError> {
    let mut out = String::with_capacity(template.len());
    let mut chars = template.chars().peekable();

    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('%') => out.push('%'),
            Some('_') => out.push(' '),
            Some('-') => out.push_str("%20"),
            Some('{') => {
                let mut body = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(c) => body.push(c),
                        None => return Err(MacroError::Unterminated),
                    }
                }
                out.push_str(&expand_one(&body, input, domain)?);
            }
            _ => return Err(MacroError::Unterminated),
        }
    }
    Ok(out)
}

fn expand_one(body: &str, input: &SessionInput, domain: &str) -> Result<String, MacroError> {
    let mut chars = body.chars();
    let letter = chars.next().ok_or(MacroError::UnknownLetter(' '))?;
    let rest: String = chars.collect();

    let url_escape = letter.is_ascii_uppercase();
    let value = match letter.to_ascii_lowercase() {
        's' => input.sender().to_string(),
        'l' => input.local_part().to_string(),
        'o' => input.sender_domain().to_string(),
        'd' => domain.to_string(),
        'i' => dotted_ip(input.client_ip),
        'h' => input
            .helo
            .clone()
            .unwrap_or_else(|| input.sender_domain().to_string()),
        'v' => match input.client_ip {
            IpAddr::V4(_) => "in-addr".to_string(),
            IpAddr::V6(_) => "ip6".to_string(),
        },
        other => return Err(MacroError::UnknownLetter(other)),
    };

    // rest = [digits] ['r'] [delimiters]
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    let after_digits = &rest[digits.len()..];
    let (reverse, delims) = match after_digits.strip_prefix('r') {
        Some(d) => (true, d),
        None => (false, after_digits),
    };
    if delims
        .chars()
        .any(|c| !matches!(c, '.' | '-' | '+' | ',' | '/' | '_' | '='))
    {
        return Err(MacroError::BadTransformer(rest.clone()));
    }
    let keep: Option<usize> = if digits.is_empty() {
        None
    } else {
        Some(
            digits
                .parse()
                .map_err(|_| MacroError::BadTransformer(rest.clone()))?,
        )
    };

    let delims = if delims.is_empty() { "." } else { delims };
    let mut parts: Vec<&str> = value.split(|c| delims.contains(c)).collect();
    if reverse {
        parts.reverse();
    }
    if let Some(n) = keep {
        if n == 0 {
            return Err(MacroError::BadTransformer(rest));
        }
        while parts.len() > n {
            parts.remove(0);
        }
    }
    let joined = parts.join(".");

    Ok(if url_escape {
        url_escape_value(&joined)
    } else {
        joined
    })
}

/// Dotted client IP: the quad for IPv4, reversed-free nibble form for IPv6.
fn dotted_ip(ip: IpAddr) -> String {
    match ip {
        IpAddr::V4(v4) => v4.to_string(),
        IpAddr::V6(v6) => {
            let mut out = String::with_capacity(63);
            for (i, byte) in v6.octets().iter().enumerate() {
                if i > 0 {
                    out.push('.');
                }
                write!(out, "{:x}.{:x}", byte >> 4, byte & 0xf).unwrap();
            }
            out
        }
    }
}

fn url_escape_value(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_' | '~') {
            out.push(c);
        } else {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                write!(out, "%{b:02x}").unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(ip: &str, sender: &str) -> SessionInput {
        SessionInput::new(ip.parse().unwrap(), sender).unwrap()
    }

    #[test]
    fn identity_domain_macro() {
        let s = session("192.0.2.1", "user@example.com");
        assert_eq!(
            expand_macros("%{d}", &s, "example.com").unwrap(),
            "example.com"
        );
    }

    #[test]
    fn client_ip_in_rbl_style_name() {
        let s = session("192.0.2.1", "user@example.com");
        assert_eq!(
            expand_macros("%{i}.rbl.test", &s, "example.com").unwrap(),
            "192.0.2.1.rbl.test"
        );
    }

    #[test]
    fn percent_escapes() {
        let s = session("192.0.2.1", "user@example.com");
        assert_eq!(expand_macros("%%", &s, "d.test").unwrap(), "%");
        assert_eq!(expand_macros("a%_b", &s, "d.test").unwrap(), "a b");
        assert_eq!(expand_macros("a%-b", &s, "d.test").unwrap(), "a%20b");
    }

    #[test]
    fn sender_parts() {
        let s = session("192.0.2.1", "strong-bad@email.example.com");
        for (tpl, want) in [
            ("%{s}", "strong-bad@email.example.com"),
            ("%{o}", "email.example.com"),
            ("%{l}", "strong-bad"),
            ("%{d2}", "example.com"),
            ("%{dr}", "com.example.email"),
            ("%{d2r}", "example.email"),
            ("%{l-}", "strong.bad"),
            ("%{lr-}", "bad.strong"),
            ("%{l1r-}", "strong"),
        ] {
            assert_eq!(
                expand_macros(tpl, &s, "email.example.com").unwrap(),
                want,
                "template {tpl}"
            );
        }
    }

    #[test]
    fn reversed_ip_for_validation_names() {
        let s = session("192.0.2.3", "user@example.com");
        assert_eq!(
            expand_macros("%{ir}.%{v}._spf.%{d2}", &s, "email.example.com").unwrap(),
            "3.2.0.192.in-addr._spf.example.com"
        );
    }

    #[test]
    fn ipv6_nibbles() {
        let s = session("2001:db8::cb01", "user@example.com");
        let expanded = expand_macros("%{ir}", &s, "d.test").unwrap();
        assert!(expanded.starts_with("1.0.b.c."));
        assert!(expanded.ends_with("1.0.0.2"));
    }

    #[test]
    fn unknown_letter_is_an_error() {
        let s = session("192.0.2.1", "user@example.com");
        assert_eq!(
            expand_macros("%{q}", &s, "d.test"),
            Err(MacroError::UnknownLetter('q'))
        );
    }

    #[test]
    fn uppercase_url_escapes() {
        let s = session("192.0.2.1", "a b@example.com");
        assert_eq!(expand_macros("%{L}", &s, "d.test").unwrap(), "a%20b");
    }
}
