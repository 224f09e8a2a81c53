//! Minimal S-expression reader for solver output and emitted scripts.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            Sexp::Atom(_) => None,
        }
    }
}

/// Parses every top-level S-expression in `src`.
pub fn parse_all(src: &str) -> Result<Vec<Sexp>, String> {
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '(' => {
                stack.push(Vec::new());
                i += 1;
            }
            ')' => {
                if stack.len() < 2 {
                    return Err(format!("unbalanced ')' at byte {i}"));
                }
                let done = stack.pop().unwrap();
                stack.last_mut().unwrap().push(Sexp::List(done));
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    if i >= bytes.len() {
                        return Err("unterminated string".into());
                    }
                    if bytes[i] == b'"' {
                        if i + 1 < bytes.len() && bytes[i + 1] == b'"' {
                            s.push('"');
                            i += 2;
                            continue;
                        }
                        i += 1;
                        break;
                    }
                    let ch = src[i..].chars().next().unwrap();
                    s.push(ch);
                    i += ch.len_utf8();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
            '|' => {
                let start = i + 1;
                let end = src[start..]
                    .find('|')
                    .map(|e| start + e)
                    .ok_or_else(|| "unterminated quoted symbol".to_string())?;
                stack.last_mut().unwrap().push(Sexp::Atom(src[start..end].to_string()));
                i = end + 1;
            }
            _ => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_whitespace() || d == '(' || d == ')' || d == ';' {
                        break;
                    }
                    i += 1;
                }
                stack.last_mut().unwrap().push(Sexp::Atom(src[start..i].to_string()));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced '('".into());
    }
    Ok(stack.pop().unwrap())
}
