//! ARPA text format reader/writer.
//!
//! Layout: `\data\` header with `ngram k=N` lines, one `\k-grams:`
//! section per order holding tab-separated `log10_prob`, n-gram,
//! optional `log10_backoff`, terminated by `\end\`.

use std::io::{BufRead, Write};

use super::{LmError, LmUnit, NGramEntry, NGramModel, TokenId};

fn parse_err(line: usize, msg: impl Into<String>) -> LmError {
    LmError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_log10(field: &str, line: usize) -> Result<f64, LmError> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(line, format!("non-numeric probability {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite probability {field:?}")));
    }
    Ok(v)
}

/// Parse an ARPA stream into a model. Entry counts must match the
/// `\data\` header exactly; anything unparseable is an error.
pub fn load_arpa<R: BufRead>(source: R) -> Result<NGramModel, LmError> {
    let mut lines = source.lines().enumerate();

    // Skip anything before \data\ (some tools emit a preamble).
    let mut found_data = false;
    for (_, line) in lines.by_ref() {
        if line?.trim() == r"\data\" {
            found_data = true;
            break;
        }
    }
    if !found_data {
        return Err(parse_err(0, r"missing \data\ header"));
    }

    // Header: "ngram k=N" lines until the first blank/section line.
    let mut declared: Vec<usize> = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (no, line) in lines.by_ref() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with('\\') {
            pending = Some((no + 1, t.to_string()));
            break;
        }
        let rest = t
            .strip_prefix("ngram ")
            .ok_or_else(|| parse_err(no + 1, format!("bad header line {t:?}")))?;
        let (k, n) = rest
            .split_once('=')
            .ok_or_else(|| parse_err(no + 1, format!("bad header line {t:?}")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| parse_err(no + 1, format!("bad order in {t:?}")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| parse_err(no + 1, format!("bad count in {t:?}")))?;
        if k != declared.len() + 1 {
            return Err(parse_err(no + 1, format!("out-of-order header line {t:?}")));
        }
        declared.push(n);
    }
    if declared.is_empty() {
        return Err(parse_err(0, "header declares no n-gram orders"));
    }
    let max_order = declared.len();
    let mut model = NGramModel::new(max_order, LmUnit::Word);

    // Sections. `pending` holds the first section marker already read.
    let mut current_order: Option<usize> = None;
    let mut found: Vec<usize> = vec![0; max_order];
    let mut saw_end = false;
    loop {
        let (no, t) = match pending.take() {
            Some(x) => x,
            None => match lines.next() {
                Some((no, line)) => (no + 1, line?.trim().to_string()),
                None => break,
            },
        };
        if t.is_empty() {
            continue;
        }
        if t == r"\end\" {
            saw_end = true;
            break;
        }
        if let Some(rest) = t.strip_prefix('\\') {
            let order: usize = rest
                .strip_suffix("-grams:")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| parse_err(no, format!("unrecognized section marker {t:?}")))?;
            if order > max_order {
                return Err(LmError::OrderTooHigh { order, max_order });
            }
            current_order = Some(order);
            continue;
        }
        let order = current_order.ok_or_else(|| parse_err(no, "entry before any section"))?;
        let mut fields = t.split('\t');
        let prob = parse_log10(fields.next().unwrap(), no)?;
        let gram_field = fields
            .next()
            .ok_or_else(|| parse_err(no, "missing n-gram field"))?;
        let backoff = match fields.next() {
            Some(f) => Some(parse_log10(f, no)?),
            None => None,
        };
        if fields.next().is_some() {
            return Err(parse_err(no, "too many fields"));
        }
        if prob > 0.0 {
            return Err(parse_err(no, format!("positive log10 probability {prob}")));
        }
        if backoff.is_some() && order == max_order {
            return Err(parse_err(no, "backoff weight on a maximum-order entry"));
        }
        let tokens: Vec<&str> = gram_field.split_whitespace().collect();
        if tokens.len() != order {
            return Err(parse_err(
                no,
                format!("expected {order} tokens, found {}", tokens.len()),
            ));
        }
        let ids: Vec<TokenId> = tokens.iter().map(|tok| model.intern(tok)).collect();
        if order > 1 && model.entry(&ids[..order - 1]).is_none() {
            return Err(parse_err(
                no,
                format!("n-gram {gram_field:?} has no stored prefix"),
            ));
        }
        model.insert_entry(
            ids.into_boxed_slice(),
            NGramEntry {
                log10_prob: prob,
                log10_backoff: backoff,
            },
        );
        found[order - 1] += 1;
    }
    if !saw_end {
        return Err(parse_err(0, r"missing \end\ marker"));
    }
    for (i, (&d, &f)) in declared.iter().zip(found.iter()).enumerate() {
        if d != f {
            return Err(LmError::CountMismatch {
                order: i + 1,
                declared: d,
                found: f,
            });
        }
    }
    Ok(model)
}

/// Serialize a model as ARPA text accepted by [`load_arpa`]. Entries are
/// emitted in id order for byte-stable output.
pub fn save_arpa<W: Write>(model: &NGramModel, mut sink: W) -> std::io::Result<()> {
    writeln!(sink, r"\data\")?;
    for k in 1..=model.max_order() {
        writeln!(sink, "ngram {}={}", k, model.entry_count(k))?;
    }
    for k in 1..=model.max_order() {
        writeln!(sink)?;
        writeln!(sink, r"\{k}-grams:")?;
        for (ids, entry) in model.entries_of_order(k) {
            let gram: Vec<&str> = ids.iter().map(|&id| model.token(id)).collect();
            write!(sink, "{:.7}\t{}", entry.log10_prob, gram.join(" "))?;
            if let Some(bo) = entry.log10_backoff {
                write!(sink, "\t{bo:.7}")?;
            }
            writeln!(sink)?;
        }
    }
    writeln!(sink)?;
    writeln!(sink, r"\end\")?;
    Ok(())
}
