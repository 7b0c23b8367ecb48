use alloc::string::String;
use alloc::vec::Vec;

use super::program::{Program, ProgramNode};
use super::registry::ModuleKind;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError { offset, message: message.into() })
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn node(&mut self) -> Result<ProgramNode, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_lowercase() || b == b'-') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if name.is_empty() {
            return match self.peek() {
                None => self.err(self.pos, "unexpected end of input, expected module name"),
                Some(_) => self.err(self.pos, "expected module name"),
            };
        }
        let module = match ModuleKind::from_name(name) {
            Some(m) => m,
            None => return self.err(start, alloc::format!("unknown module `{name}`")),
        };

        let arg = if self.peek() == Some(b'[') {
            let open = self.pos;
            self.pos += 1;
            let body_start = self.pos;
            loop {
                match self.peek() {
                    None => return self.err(self.pos, "unterminated `[` argument"),
                    Some(b']') => break,
                    Some(b'[') => return self.err(self.pos, "nested `[` in argument"),
                    Some(_) => self.pos += 1,
                }
            }
            let body = &self.src[body_start..self.pos];
            self.pos += 1;
            let tokens: Vec<String> = body.split_whitespace().map(String::from).collect();
            if tokens.is_empty() {
                return self.err(open, "empty string argument");
            }
            if !module.takes_string_arg() {
                return self.err(open, alloc::format!("`{name}` takes no string argument"));
            }
            Some(tokens)
        } else {
            if module.takes_string_arg() {
                return self.err(self.pos, alloc::format!("`{name}` requires a bracketed argument"));
            }
            None
        };

        let mut children = Vec::new();
        let after_head = self.pos;
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                children.push(self.node()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    None => return self.err(self.pos, "unbalanced parentheses: expected `)`"),
                    Some(c) => return self.err(self.pos, alloc::format!("unexpected `{}`", c as char)),
                }
            }
        }
        if children.len() != module.arity() {
            return self.err(
                after_head,
                alloc::format!("`{name}` expects {} children, found {}", module.arity(), children.len()),
            );
        }
        Ok(ProgramNode { module, arg, children })
    }
}

/// Parses program text such as `count(filter[in the first half](find[field goals]))`.
pub fn parse(text: &str) -> Result<Program, SyntaxError> {
    let mut parser = Parser { src: text, pos: 0 };
    let root = parser.node()?;
    parser.skip_ws();
    if parser.pos != text.len() {
        return parser.err(parser.pos, "trailing input");
    }
    Ok(Program::new(root))
}

/// Canonical text: single spaces inside arguments, `, ` between children.
pub fn render(p: &Program) -> String {
    fn walk(node: &ProgramNode, out: &mut String) {
        out.push_str(node.module.name());
        if let Some(arg) = &node.arg {
            out.push('[');
            out.push_str(&arg.join(" "));
            out.push(']');
        }
        if !node.children.is_empty() {
            out.push('(');
            for (i, c) in node.children.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                walk(c, out);
            }
            out.push(')');
        }
    }
    let mut s = String::new();
    walk(&p.root, &mut s);
    s
}
