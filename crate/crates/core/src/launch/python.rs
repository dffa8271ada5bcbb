//! Pattern-based reading of Python launch files.
//!
//! Statements are tokenized and parsed into a small expression tree, then
//! evaluated symbolically: only launch constructs, string literals, lists,
//! dicts and path joins have meaning. Nothing is executed.

use std::collections::BTreeMap;

use super::{ArgDecl, Condition, LaunchAction, LaunchSpec, Segment, Text};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Str(String),
    /// f-strings and byte strings; content is not interpreted.
    OpaqueStr,
    Num(String),
    Op(String),
    Newline,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

fn tokenize(src: &str) -> Vec<Token> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut depth = 0i32;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            if depth <= 0 && !matches!(out.last(), Some(Token { tok: Tok::Newline, .. }) | None) {
                out.push(Token { tok: Tok::Newline, line });
            }
            line += 1;
            i += 1;
            continue;
        }
        if c == '\\' && chars.get(i + 1) == Some(&'\n') {
            line += 1;
            i += 2;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let is_prefix = word.len() <= 2 && word.chars().all(|c| "rRbBfFuU".contains(c));
            if is_prefix && matches!(chars.get(i), Some('"') | Some('\'')) {
                let opaque = word.chars().any(|c| "bBfF".contains(c));
                let raw = word.chars().any(|c| "rR".contains(c));
                let start_line = line;
                let (text, next, lines) = read_string(&chars, i, raw);
                i = next;
                line += lines;
                out.push(Token {
                    tok: if opaque { Tok::OpaqueStr } else { Tok::Str(text) },
                    line: start_line,
                });
                continue;
            }
            out.push(Token { tok: Tok::Name(word), line });
            continue;
        }
        if c == '"' || c == '\'' {
            let start_line = line;
            let (text, next, lines) = read_string(&chars, i, false);
            i = next;
            line += lines;
            out.push(Token {
                tok: Tok::Str(text),
                line: start_line,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Num(chars[start..i].iter().collect()),
                line,
            });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op = if matches!(two.as_str(), "**" | "==" | "!=" | "<=" | ">=" | "->" | "+=" | ":=") {
            two
        } else {
            c.to_string()
        };
        match op.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            _ => {}
        }
        i += op.chars().count();
        out.push(Token { tok: Tok::Op(op), line });
    }
    out.push(Token { tok: Tok::Newline, line });
    out
}

/// Reads a quoted string starting at `i`. Returns content, the index after
/// the closing quote, and the number of newlines consumed.
fn read_string(chars: &[char], i: usize, raw: bool) -> (String, usize, usize) {
    let quote = chars[i];
    let triple = chars.get(i + 1) == Some(&quote) && chars.get(i + 2) == Some(&quote);
    let mut j = if triple { i + 3 } else { i + 1 };
    let mut text = String::new();
    let mut lines = 0;
    while j < chars.len() {
        let c = chars[j];
        if triple {
            if c == quote && chars.get(j + 1) == Some(&quote) && chars.get(j + 2) == Some(&quote) {
                return (text, j + 3, lines);
            }
        } else if c == quote {
            return (text, j + 1, lines);
        } else if c == '\n' {
            return (text, j, lines);
        }
        if c == '\n' {
            lines += 1;
        }
        if c == '\\' && !raw && j + 1 < chars.len() {
            text.push(match chars[j + 1] {
                'n' => '\n',
                't' => '\t',
                other => other,
            });
            j += 2;
            continue;
        }
        text.push(c);
        j += 1;
    }
    (text, j, lines)
}

#[derive(Debug, Clone)]
enum Expr {
    Str(String),
    Name(String),
    Attr(Box<Expr>, String),
    Call {
        func: Box<Expr>,
        args: Vec<Expr>,
        kwargs: Vec<(String, Expr)>,
        line: usize,
    },
    List(Vec<Expr>),
    Dict(Vec<(Expr, Expr)>),
    Add(Box<Expr>, Box<Expr>),
    Opaque(String),
}

impl Expr {
    fn dotted(&self) -> Option<String> {
        match self {
            Expr::Name(n) => Some(n.clone()),
            Expr::Attr(base, name) => Some(format!("{}.{name}", base.dotted()?)),
            _ => None,
        }
    }
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

const STOPS: [&str; 5] = [",", ")", "]", "}", ":"];

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        self.toks.get(self.pos).map(|t| &t.tok).unwrap_or(&Tok::Newline)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.line).unwrap_or(0)
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if o == op)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn at_stop(&self) -> bool {
        match self.peek() {
            Tok::Newline => true,
            Tok::Op(o) => STOPS.contains(&o.as_str()) || o == "=",
            _ => false,
        }
    }

    /// Skips to the next top-level delimiter, returning an opaque marker.
    fn skip_opaque(&mut self, what: &str) -> Expr {
        let mut depth = 0;
        while self.pos < self.toks.len() {
            match self.peek() {
                Tok::Newline if depth == 0 => break,
                Tok::Op(o) if depth == 0 && (STOPS.contains(&o.as_str())) => break,
                Tok::Op(o) if matches!(o.as_str(), "(" | "[" | "{") => depth += 1,
                Tok::Op(o) if matches!(o.as_str(), ")" | "]" | "}") => depth -= 1,
                _ => {}
            }
            self.pos += 1;
        }
        Expr::Opaque(what.to_string())
    }

    fn expr(&mut self) -> Expr {
        let mut left = self.postfix();
        loop {
            if self.eat_op("+") {
                let right = self.postfix();
                left = Expr::Add(Box::new(left), Box::new(right));
            } else if self.at_stop() {
                return left;
            } else {
                // conditional expressions, comparisons, other operators
                return self.skip_opaque("expression");
            }
        }
    }

    fn postfix(&mut self) -> Expr {
        let mut e = self.primary();
        loop {
            if self.eat_op(".") {
                match self.peek().clone() {
                    Tok::Name(n) => {
                        self.pos += 1;
                        e = Expr::Attr(Box::new(e), n);
                    }
                    _ => return self.skip_opaque("attribute"),
                }
            } else if self.is_op("(") {
                let line = self.line();
                self.pos += 1;
                let (args, kwargs) = self.call_args();
                e = Expr::Call {
                    func: Box::new(e),
                    args,
                    kwargs,
                    line,
                };
            } else if self.is_op("[") {
                self.pos += 1;
                self.skip_opaque("subscript");
                self.eat_op("]");
                e = Expr::Opaque("subscript".into());
            } else {
                return e;
            }
        }
    }

    fn call_args(&mut self) -> (Vec<Expr>, Vec<(String, Expr)>) {
        let mut args = Vec::new();
        let mut kwargs = Vec::new();
        loop {
            if self.eat_op(")") || matches!(self.peek(), Tok::Newline) && self.pos >= self.toks.len() {
                break;
            }
            if self.eat_op("*") || self.eat_op("**") {
                args.push(self.skip_opaque("unpacking"));
            } else if let (Tok::Name(n), Some(Token { tok: Tok::Op(eq), .. })) = (self.peek().clone(), self.toks.get(self.pos + 1)) {
                if eq == "=" {
                    self.pos += 2;
                    kwargs.push((n, self.expr()));
                } else {
                    args.push(self.expr());
                }
            } else {
                args.push(self.expr());
            }
            if !self.eat_op(",") {
                if !self.eat_op(")") {
                    self.skip_opaque("argument");
                    self.eat_op(")");
                }
                break;
            }
        }
        (args, kwargs)
    }

    fn sequence(&mut self, close: &str) -> Vec<Expr> {
        let mut items = Vec::new();
        loop {
            if self.eat_op(close) {
                break;
            }
            if self.pos >= self.toks.len() {
                break;
            }
            items.push(self.expr());
            if self.is_op("for") || matches!(self.peek(), Tok::Name(n) if n == "for") {
                self.skip_opaque("comprehension");
            }
            if !self.eat_op(",") {
                if !self.eat_op(close) {
                    self.skip_opaque("element");
                    self.eat_op(close);
                }
                break;
            }
        }
        items
    }

    fn primary(&mut self) -> Expr {
        let tok = self.peek().clone();
        match tok {
            Tok::Str(s) => {
                self.pos += 1;
                let mut s = s;
                // implicit concatenation of adjacent literals
                while let Tok::Str(next) = self.peek().clone() {
                    s.push_str(&next);
                    self.pos += 1;
                }
                Expr::Str(s)
            }
            Tok::OpaqueStr => {
                self.pos += 1;
                Expr::Opaque("formatted string".into())
            }
            Tok::Num(n) => {
                self.pos += 1;
                Expr::Opaque(n)
            }
            Tok::Name(n) if n == "lambda" => self.skip_opaque("lambda"),
            Tok::Name(n) => {
                self.pos += 1;
                Expr::Name(n)
            }
            Tok::Op(o) if o == "[" => {
                self.pos += 1;
                Expr::List(self.sequence("]"))
            }
            Tok::Op(o) if o == "(" => {
                self.pos += 1;
                let items = self.sequence(")");
                if items.len() == 1 {
                    items.into_iter().next().unwrap()
                } else {
                    Expr::List(items)
                }
            }
            Tok::Op(o) if o == "{" => {
                self.pos += 1;
                let mut entries = Vec::new();
                loop {
                    if self.eat_op("}") || self.pos >= self.toks.len() {
                        break;
                    }
                    let k = self.expr();
                    if !self.eat_op(":") {
                        self.skip_opaque("set");
                        self.eat_op("}");
                        return Expr::Opaque("set".into());
                    }
                    let v = self.expr();
                    entries.push((k, v));
                    if !self.eat_op(",") {
                        self.eat_op("}");
                        break;
                    }
                }
                Expr::Dict(entries)
            }
            _ => {
                self.pos += 1;
                self.skip_opaque("token")
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Stmt {
    Assign(String, Expr),
    Return(Expr),
    Expr(Expr),
}

fn statements(toks: &[Token]) -> Vec<Stmt> {
    let lines: Vec<&[Token]> = toks
        .split(|t| t.tok == Tok::Newline)
        .filter(|l| !l.is_empty())
        .collect();
    let mut out = Vec::new();
    for line in lines {
        let head = match &line[0].tok {
            Tok::Name(n) => n.as_str(),
            _ => "",
        };
        if matches!(
            head,
            "import" | "from" | "def" | "class" | "if" | "elif" | "else" | "for" | "while" | "with" | "try" | "except" | "pass" | "@"
        ) {
            continue;
        }
        let mut p = Parser { toks: line, pos: 0 };
        if head == "return" {
            p.pos = 1;
            out.push(Stmt::Return(p.expr()));
            continue;
        }
        if let (Tok::Name(n), Some(Token { tok: Tok::Op(eq), .. })) = (&line[0].tok, line.get(1)) {
            if eq == "=" {
                p.pos = 2;
                out.push(Stmt::Assign(n.clone(), p.expr()));
                continue;
            }
        }
        out.push(Stmt::Expr(p.expr()));
    }
    out
}

#[derive(Debug, Clone)]
enum Value {
    Text(Text),
    List(Vec<Value>),
    Dict(Vec<(Value, Value)>),
    Action(LaunchAction),
    Arg(ArgDecl),
    Description(Vec<Value>),
    Condition(Condition),
    /// Launch construct outside the supported subset.
    Unsupported(String, usize),
    Opaque(String),
}

impl Value {
    fn text(&self) -> Option<Text> {
        match self {
            Value::Text(t) => Some(t.clone()),
            Value::List(items) => {
                let mut out = Text::default();
                for item in items {
                    out = out.concat(item.text()?);
                }
                Some(out)
            }
            _ => None,
        }
    }

    fn text_or_dynamic(&self) -> Text {
        self.text().unwrap_or_else(|| Text::dynamic("non-literal value"))
    }
}

const UNSUPPORTED: [&str; 14] = [
    "ComposableNodeContainer",
    "LoadComposableNodes",
    "ComposableNode",
    "OpaqueFunction",
    "ExecuteProcess",
    "TimerAction",
    "RegisterEventHandler",
    "SetParameter",
    "SetParametersFromFile",
    "SetRemap",
    "SetEnvironmentVariable",
    "EmitEvent",
    "LogInfo",
    "Shutdown",
];

struct Eval<'a> {
    path: &'a str,
    env: BTreeMap<String, Value>,
    warnings: Vec<String>,
}

impl<'a> Eval<'a> {
    fn eval(&mut self, e: &Expr) -> Value {
        match e {
            Expr::Str(s) => Value::Text(Text::lit(s.clone())),
            Expr::Name(n) if n == "__file__" => Value::Text(Text(vec![Segment::ThisDir, Segment::Lit("/<file>".into())])),
            Expr::Name(n) => self.env.get(n).cloned().unwrap_or_else(|| Value::Opaque(n.clone())),
            Expr::Attr(_, name) => Value::Opaque(name.clone()),
            Expr::List(items) => Value::List(items.iter().map(|x| self.eval(x)).collect()),
            Expr::Dict(entries) => Value::Dict(entries.iter().map(|(k, v)| (self.eval(k), self.eval(v))).collect()),
            Expr::Add(a, b) => {
                let (a, b) = (self.eval(a), self.eval(b));
                match (a, b) {
                    (Value::List(mut x), Value::List(y)) => {
                        x.extend(y);
                        Value::List(x)
                    }
                    (a, b) => match (a.text(), b.text()) {
                        (Some(x), Some(y)) => Value::Text(x.concat(y)),
                        _ => Value::Opaque("sum".into()),
                    },
                }
            }
            Expr::Opaque(what) => Value::Opaque(what.clone()),
            Expr::Call { func, args, kwargs, line } => self.call(func, args, kwargs, *line),
        }
    }

    fn call(&mut self, func: &Expr, args: &[Expr], kwargs: &[(String, Expr)], line: usize) -> Value {
        let dotted = func.dotted();
        // method calls on values: `.items()` on a dict yields the dict
        if let Expr::Attr(base, method) = func {
            if method == "items" {
                return self.eval(base);
            }
            if method == "add_action" || method == "add_entity" {
                return Value::Opaque("add_action".into());
            }
        }
        let Some(dotted) = dotted else {
            return Value::Opaque("call".into());
        };
        let short = dotted.rsplit('.').next().unwrap_or(&dotted).to_string();
        let pos: Vec<Value> = args.iter().map(|a| self.eval(a)).collect();
        let kw: BTreeMap<String, Value> = kwargs.iter().map(|(k, v)| (k.clone(), self.eval(v))).collect();
        let get = |name: &str, index: Option<usize>| -> Option<Value> {
            kw.get(name).cloned().or_else(|| index.and_then(|i| pos.get(i).cloned()))
        };
        let condition = || match kw.get("condition") {
            None => Ok(None),
            Some(Value::Condition(c)) => Ok(Some(c.clone())),
            Some(_) => Err(()),
        };

        match short.as_str() {
            "Node" | "LifecycleNode" => {
                let package = get("package", None).map(|v| v.text_or_dynamic());
                let executable = get("executable", None)
                    .or_else(|| get("node_executable", None))
                    .map(|v| v.text_or_dynamic());
                let (Some(package), Some(executable)) = (package, executable) else {
                    return Value::Unsupported(format!("{short} without package/executable"), line);
                };
                let Ok(condition) = condition() else {
                    return Value::Unsupported(format!("{short} with non-literal condition"), line);
                };
                let remappings = match get("remappings", None) {
                    None => Vec::new(),
                    Some(Value::List(pairs)) => pairs
                        .iter()
                        .filter_map(|p| match p {
                            Value::List(ft) if ft.len() == 2 => Some((ft[0].text_or_dynamic(), ft[1].text_or_dynamic())),
                            _ => {
                                self.warnings.push(format!("{}:{line}: remapping entry is not a literal pair; skipped", self.path));
                                None
                            }
                        })
                        .collect(),
                    Some(_) => {
                        self.warnings.push(format!("{}:{line}: remappings are not a literal list; skipped", self.path));
                        Vec::new()
                    }
                };
                Value::Action(LaunchAction::NodeInstantiation {
                    package,
                    executable,
                    name: get("name", None).or_else(|| get("node_name", None)).map(|v| v.text_or_dynamic()),
                    namespace: get("namespace", None).or_else(|| get("node_namespace", None)).map(|v| v.text_or_dynamic()),
                    remappings,
                    condition,
                    line,
                })
            }
            "IncludeLaunchDescription" => {
                let Some(source) = get("launch_description_source", Some(0)) else {
                    return Value::Unsupported("IncludeLaunchDescription without source".into(), line);
                };
                let Ok(condition) = condition() else {
                    return Value::Unsupported("include with non-literal condition".into(), line);
                };
                let mut arguments = Vec::new();
                match get("launch_arguments", None) {
                    Some(Value::Dict(entries)) => {
                        for (k, v) in entries {
                            if let Some(k) = k.text().and_then(|t| t.as_literal()) {
                                arguments.push((k, v.text_or_dynamic()));
                            }
                        }
                    }
                    Some(Value::List(entries)) => {
                        for e in entries {
                            if let Value::List(kv) = e {
                                if let (Some(k), Some(v)) = (kv.first().and_then(|k| k.text()).and_then(|t| t.as_literal()), kv.get(1)) {
                                    arguments.push((k, v.text_or_dynamic()));
                                }
                            }
                        }
                    }
                    _ => {}
                }
                Value::Action(LaunchAction::Include {
                    target: source.text_or_dynamic(),
                    namespace: None,
                    arguments,
                    condition,
                    line,
                })
            }
            "PythonLaunchDescriptionSource" | "XMLLaunchDescriptionSource" | "AnyLaunchDescriptionSource"
            | "FrontendLaunchDescriptionSource" => get("launch_file_path", Some(0)).unwrap_or(Value::Opaque(short)),
            "GroupAction" => {
                let Ok(condition) = condition() else {
                    return Value::Unsupported("GroupAction with non-literal condition".into(), line);
                };
                let scoped = !matches!(kwargs.iter().find(|(k, _)| k == "scoped"), Some((_, Expr::Name(n))) if n == "False");
                let children = match get("actions", Some(0)) {
                    Some(Value::List(items)) => self.actions(&items),
                    _ => return Value::Unsupported("GroupAction without literal action list".into(), line),
                };
                Value::Action(LaunchAction::Group {
                    children,
                    scoped,
                    condition,
                    line,
                })
            }
            "PushRosNamespace" | "PushROSNamespace" => match get("namespace", Some(0)) {
                Some(v) => Value::Action(LaunchAction::NamespacePush {
                    segment: v.text_or_dynamic(),
                    line,
                }),
                None => Value::Unsupported("PushRosNamespace without namespace".into(), line),
            },
            "DeclareLaunchArgument" => match get("name", Some(0)).and_then(|v| v.text()).and_then(|t| t.as_literal()) {
                Some(name) => Value::Arg(ArgDecl {
                    name,
                    default: get("default_value", Some(1)).map(|v| v.text_or_dynamic()),
                }),
                None => Value::Unsupported("DeclareLaunchArgument with non-literal name".into(), line),
            },
            "LaunchConfiguration" => match get("variable_name", Some(0)).and_then(|v| v.text()).and_then(|t| t.as_literal()) {
                Some(name) => Value::Text(Text(vec![Segment::Var(name)])),
                None => Value::Text(Text::dynamic("LaunchConfiguration")),
            },
            "IfCondition" | "UnlessCondition" => match get("predicate_expression", Some(0)).and_then(|v| v.text()) {
                Some(value) => Value::Condition(Condition {
                    value,
                    negated: short == "UnlessCondition",
                }),
                None => Value::Opaque("condition".into()),
            },
            "join" if dotted.ends_with("path.join") => {
                let parts: Option<Vec<Text>> = pos.iter().map(|v| v.text()).collect();
                parts.map(|p| Value::Text(Text::join_path(p))).unwrap_or(Value::Opaque("path".into()))
            }
            "PathJoinSubstitution" => match pos.first() {
                Some(Value::List(items)) => {
                    let parts: Option<Vec<Text>> = items.iter().map(|v| v.text()).collect();
                    parts.map(|p| Value::Text(Text::join_path(p))).unwrap_or(Value::Opaque("path".into()))
                }
                _ => Value::Opaque("path".into()),
            },
            "get_package_share_directory" | "FindPackageShare" => {
                match get("package_name", Some(0)).and_then(|v| v.text()).and_then(|t| t.as_literal()) {
                    Some(pkg) => Value::Text(Text(vec![Segment::PkgShare(pkg)])),
                    None => Value::Text(Text::dynamic("package share")),
                }
            }
            "dirname" if dotted.ends_with("path.dirname") => match pos.first() {
                Some(Value::Text(t)) if t.0.first() == Some(&Segment::ThisDir) => Value::Text(Text(vec![Segment::ThisDir])),
                _ => Value::Opaque("dirname".into()),
            },
            "ThisLaunchFileDir" => Value::Text(Text(vec![Segment::ThisDir])),
            "TextSubstitution" => get("text", Some(0)).unwrap_or(Value::Opaque(short)),
            "LaunchDescription" => match pos.first() {
                Some(Value::List(items)) => Value::Description(items.clone()),
                None => Value::Description(Vec::new()),
                Some(_) => Value::Unsupported("LaunchDescription with non-literal list".into(), line),
            },
            s if UNSUPPORTED.contains(&s) => Value::Unsupported(s.to_string(), line),
            _ => Value::Opaque(short),
        }
    }

    /// Converts evaluated list items into actions, warning about the rest.
    fn actions(&mut self, items: &[Value]) -> Vec<LaunchAction> {
        let mut out = Vec::new();
        for item in items {
            match item {
                Value::Action(a) => out.push(a.clone()),
                Value::Arg(_) => {}
                Value::List(inner) => out.extend(self.actions(inner)),
                Value::Unsupported(what, line) => {
                    self.warnings.push(format!("{}:{line}: unsupported construct {what}; skipped", self.path))
                }
                Value::Opaque(what) => self
                    .warnings
                    .push(format!("{}: unsupported launch entity `{what}`; skipped", self.path)),
                other => self
                    .warnings
                    .push(format!("{}: unexpected value in action list: {other:?}; skipped", self.path)),
            }
        }
        out
    }
}

fn collect_args(v: &Value, out: &mut Vec<ArgDecl>) {
    match v {
        Value::Arg(a) => out.push(a.clone()),
        Value::List(items) | Value::Description(items) => items.iter().for_each(|i| collect_args(i, out)),
        _ => {}
    }
}

pub(super) fn parse(path: &str, text: &str) -> LaunchSpec {
    let toks = tokenize(text);
    let stmts = statements(&toks);
    let mut ev = Eval {
        path,
        env: BTreeMap::new(),
        warnings: Vec::new(),
    };
    let mut arguments = Vec::new();
    let mut returned = None;
    // descriptions built incrementally through `ld.add_action(x)`
    let mut added: BTreeMap<String, Vec<Value>> = BTreeMap::new();

    for stmt in &stmts {
        match stmt {
            Stmt::Assign(name, e) => {
                let v = ev.eval(e);
                collect_args(&v, &mut arguments);
                ev.env.insert(name.clone(), v);
            }
            Stmt::Return(e) => {
                let v = ev.eval(e);
                collect_args(&v, &mut arguments);
                returned = Some(v);
            }
            Stmt::Expr(Expr::Call { func, args, .. }) if matches!(&**func, Expr::Attr(_, m) if m == "add_action" || m == "add_entity") => {
                let Expr::Attr(base, _) = &**func else { unreachable!() };
                if let (Some(target), Some(arg)) = (base.dotted(), args.first()) {
                    let v = ev.eval(arg);
                    collect_args(&v, &mut arguments);
                    added.entry(target).or_default().push(v);
                }
            }
            Stmt::Expr(_) => {}
        }
    }

    let mut items = match returned {
        Some(Value::Description(items)) => items,
        Some(Value::Opaque(name)) => match ev.env.get(&name) {
            Some(Value::Description(items)) => items.clone(),
            _ => Vec::new(),
        },
        Some(Value::Unsupported(what, line)) => {
            ev.warnings.push(format!("{path}:{line}: unsupported construct {what}; skipped"));
            Vec::new()
        }
        _ => {
            // no recognizable return: fall back to any description variable
            ev.env
                .values()
                .find_map(|v| match v {
                    Value::Description(items) => Some(items.clone()),
                    _ => None,
                })
                .unwrap_or_default()
        }
    };
    let returned_name = stmts.iter().rev().find_map(|s| match s {
        Stmt::Return(Expr::Name(n)) => Some(n.clone()),
        _ => None,
    });
    for (target, values) in added {
        if returned_name.as_deref().map(|r| r == target).unwrap_or(true) {
            items.extend(values);
        }
    }
    if stmts.iter().all(|s| !matches!(s, Stmt::Return(_))) {
        ev.warnings.push(format!("{path}: no generate_launch_description return found"));
    }
    let actions = ev.actions(&items);
    let mut seen = std::collections::BTreeSet::new();
    arguments.retain(|a: &ArgDecl| seen.insert(a.name.clone()));
    LaunchSpec {
        path: path.to_string(),
        arguments,
        actions,
        warnings: ev.warnings,
    }
}
