use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{
    check_coord, check_shape, check_size, Ast, Combine, DslError, Extrude, Plane, Primitive,
    Shape2d, Span, SIZE_LIMIT,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Eq,
    Open,
    Close,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(text: &str) -> Result<Vec<Token>, DslError> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        let span = Span { line, col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '#' {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        let single = match c {
            '=' => Some(Tok::Eq),
            '{' => Some(Tok::Open),
            '}' => Some(Tok::Close),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            col += 1;
            out.push(Token { tok, span });
            continue;
        }
        let is_word_char =
            |c: char| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '+');
        if !is_word_char(c) {
            return Err(DslError::Parse {
                span,
                message: format!("unexpected character '{c}'"),
            });
        }
        let mut end = start;
        while let Some(&(i, c)) = chars.peek() {
            if !is_word_char(c) {
                break;
            }
            end = i + c.len_utf8();
            chars.next();
            col += 1;
        }
        let word = &text[start..end];
        let first = word.as_bytes()[0];
        let tok = if first.is_ascii_digit() || matches!(first, b'-' | b'+' | b'.') {
            match word.parse::<f64>() {
                Ok(v) => Tok::Num(v),
                Err(_) => {
                    return Err(DslError::Parse {
                        span,
                        message: format!("bad number '{word}'"),
                    })
                }
            }
        } else if first.is_ascii_alphabetic() || first == b'_' {
            Tok::Word(word.to_string())
        } else {
            return Err(DslError::Parse {
                span,
                message: format!("unexpected token '{word}'"),
            });
        };
        out.push(Token { tok, span });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: Span,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn span(&self) -> Span {
        self.peek().map(|t| t.span).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, DslError> {
        Err(DslError::Parse {
            span: self.span(),
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Span, DslError> {
        match self.peek() {
            Some(t) if t.tok == want => {
                let s = t.span;
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, Span), DslError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w),
                span,
            }) => {
                let out = (w.clone(), *span);
                self.pos += 1;
                Ok(out)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn number(&mut self) -> Result<(f64, Span), DslError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Num(v),
                span,
            }) => {
                let out = (*v, *span);
                self.pos += 1;
                Ok(out)
            }
            _ => self.err("expected a number"),
        }
    }

    fn step(&mut self, index: usize) -> Result<Extrude, DslError> {
        let (kw, _) = self.word("'extrude'")?;
        if kw != "extrude" {
            self.pos -= 1;
            return self.err(format!("unknown keyword '{kw}', expected 'extrude'"));
        }
        let mut plane = None;
        let mut offset = None;
        let mut height = None;
        let mut combine = None;
        while let Some(Token {
            tok: Tok::Word(_), ..
        }) = self.peek()
        {
            let (key, key_span) = self.word("attribute")?;
            self.expect(Tok::Eq, "'='")?;
            let dup = || DslError::Parse {
                span: key_span,
                message: format!("duplicate '{key}'"),
            };
            match key.as_str() {
                "plane" => {
                    let (v, s) = self.word("plane name")?;
                    let p = match v.as_str() {
                        "XY" => Plane::XY,
                        "XZ" => Plane::XZ,
                        "YZ" => Plane::YZ,
                        _ => {
                            return Err(DslError::Parse {
                                span: s,
                                message: format!("unknown plane '{v}'"),
                            })
                        }
                    };
                    if plane.replace(p).is_some() {
                        return Err(dup());
                    }
                }
                "z0" => {
                    let (v, s) = self.number()?;
                    check_coord(v).map_err(|message| DslError::Range { span: s, message })?;
                    if offset.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                "h" => {
                    let (v, s) = self.number()?;
                    check_size(v, SIZE_LIMIT)
                        .map_err(|message| DslError::Range { span: s, message })?;
                    if height.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                "op" => {
                    let (v, s) = self.word("boolean op")?;
                    let c = match v.as_str() {
                        "new" => Combine::New,
                        "union" => Combine::Union,
                        "cut" => Combine::Cut,
                        "intersect" => Combine::Intersect,
                        _ => {
                            return Err(DslError::Parse {
                                span: s,
                                message: format!("unknown op '{v}'"),
                            })
                        }
                    };
                    if combine.replace((c, s)).is_some() {
                        return Err(dup());
                    }
                }
                _ => {
                    return Err(DslError::Parse {
                        span: key_span,
                        message: format!("unknown attribute '{key}'"),
                    })
                }
            }
        }
        let open = self.span();
        self.expect(Tok::Open, "'{'")?;
        let missing = |what: &str| DslError::Parse {
            span: open,
            message: format!("missing '{what}'"),
        };
        let plane = plane.ok_or_else(|| missing("plane"))?;
        let offset = offset.ok_or_else(|| missing("z0"))?;
        let height = height.ok_or_else(|| missing("h"))?;
        let combine = match combine {
            None if index == 0 => Combine::New,
            None => Combine::Union,
            Some((c, s)) => {
                if (index == 0) != (c == Combine::New) {
                    return Err(DslError::Parse {
                        span: s,
                        message: if index == 0 {
                            "first step must use op=new".into()
                        } else {
                            "op=new is only allowed on the first step".into()
                        },
                    });
                }
                c
            }
        };
        let mut sketch = Vec::new();
        loop {
            match self.peek() {
                Some(Token {
                    tok: Tok::Close, ..
                }) => {
                    self.pos += 1;
                    break;
                }
                Some(_) => sketch.push(self.primitive()?),
                None => return self.err("unterminated sketch, expected '}'"),
            }
        }
        if sketch.is_empty() {
            return Err(DslError::Parse {
                span: open,
                message: "empty sketch".into(),
            });
        }
        Ok(Extrude {
            plane,
            offset,
            height,
            combine,
            sketch,
        })
    }

    fn primitive(&mut self) -> Result<Primitive, DslError> {
        let (sign, _) = self.word("'add' or 'sub'")?;
        let subtract = match sign.as_str() {
            "add" => false,
            "sub" => true,
            _ => {
                self.pos -= 1;
                return self.err(format!("unknown keyword '{sign}', expected 'add' or 'sub'"));
            }
        };
        let (kind, kind_span) = self.word("shape")?;
        let shape = match kind.as_str() {
            "rect" => {
                let [cx, cy, w, h] = self.numbers::<4>()?;
                Shape2d::Rect { cx, cy, w, h }
            }
            "circle" => {
                let [cx, cy, r] = self.numbers::<3>()?;
                Shape2d::Circle { cx, cy, r }
            }
            "polygon" => {
                let mut vals = Vec::new();
                while let Some(Token {
                    tok: Tok::Num(v), ..
                }) = self.peek()
                {
                    vals.push(*v);
                    self.pos += 1;
                }
                if vals.len() < 6 || vals.len() % 2 != 0 {
                    return self.err("polygon needs an even number (>= 6) of coordinates");
                }
                Shape2d::Polygon(vals.chunks(2).map(|c| [c[0], c[1]]).collect())
            }
            _ => {
                return Err(DslError::Parse {
                    span: kind_span,
                    message: format!("unknown shape '{kind}'"),
                })
            }
        };
        check_shape(&shape).map_err(|message| DslError::Range {
            span: kind_span,
            message,
        })?;
        Ok(Primitive { subtract, shape })
    }

    fn numbers<const N: usize>(&mut self) -> Result<[f64; N], DslError> {
        let mut out = [0.0; N];
        for v in out.iter_mut() {
            *v = self.number()?.0;
        }
        Ok(out)
    }
}

/// Parses and validates program text.
pub fn parse(text: &str) -> Result<Ast, DslError> {
    let toks = lex(text)?;
    let lines = text.split('\n').count() as u32;
    let last_col = text
        .rsplit('\n')
        .next()
        .map(|l| l.chars().count() as u32 + 1)
        .unwrap_or(1);
    let mut p = Parser {
        toks,
        pos: 0,
        end: Span {
            line: lines.max(1),
            col: last_col,
        },
    };
    let mut steps = Vec::new();
    while p.peek().is_some() {
        let index = steps.len();
        steps.push(p.step(index)?);
    }
    if steps.is_empty() {
        return p.err("program has no steps");
    }
    let ast = Ast { steps };
    ast.validate()?;
    Ok(ast)
}
