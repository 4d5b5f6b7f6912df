#![allow(dead_code)]

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use verseforge::corpus::is_word;
use verseforge::{Lexicon, Verse};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Loopback HTTP server answering each request with the next scripted
/// `(status, body)`; the last entry repeats once the script runs out.
pub struct StubServer {
    pub url: String,
    hits: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start(script: Vec<(u16, String)>) -> StubServer {
        assert!(!script.is_empty());
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&hits);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let n = counter.fetch_add(1, Ordering::SeqCst);
                let (status, body) = &script[n.min(script.len() - 1)];
                let _ = answer(stream, *status, body);
            }
        });
        StubServer { url, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn answer(stream: TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream);
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut request = vec![0u8; length];
    reader.read_exact(&mut request)?;
    let mut stream = reader.into_inner();
    write!(
        stream,
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

/// Per-word rhyme lengths by exhaustive comparison of every earlier word in
/// the window and every suffix length.
pub fn brute_rhyme_lengths(verse: &Verse, lex: &Lexicon, window: usize, exclude_identical: bool) -> Vec<usize> {
    let words: Vec<&str> = verse.tokens().filter(|t| is_word(t)).collect();
    let mut stream: Vec<String> = Vec::new();
    let mut ends: Vec<usize> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for w in &words {
        let v = lex.vowels_of(w);
        counts.push(v.len());
        stream.extend(v);
        ends.push(stream.len());
    }
    (0..words.len())
        .map(|i| {
            if counts[i] == 0 {
                return 0;
            }
            let mut best = 0;
            for j in i.saturating_sub(window)..i {
                if counts[j] == 0 || (exclude_identical && words[i] == words[j]) {
                    continue;
                }
                let (pi, pj) = (ends[i], ends[j]);
                for k in 1..=pj {
                    if stream[pi - k..pi] == stream[pj - k..pj] {
                        best = best.max(k);
                    }
                }
            }
            best
        })
        .collect()
}

pub fn brute_rd(verse: &Verse, lex: &Lexicon, window: usize) -> f64 {
    let l = brute_rhyme_lengths(verse, lex, window, true);
    if l.is_empty() {
        0.0
    } else {
        l.iter().sum::<usize>() as f64 / l.len() as f64
    }
}

/// Average over lines of the share of a line's unique words found elsewhere
/// in the verse.
pub fn brute_rep(verse: &Verse) -> f64 {
    let lines: Vec<HashSet<&str>> = verse
        .lines
        .iter()
        .map(|l| l.tokens.iter().map(String::as_str).filter(|t| is_word(t)).collect())
        .collect();
    if lines.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for (i, own) in lines.iter().enumerate() {
        if own.is_empty() {
            continue;
        }
        let shared = own
            .iter()
            .filter(|t| lines.iter().enumerate().any(|(j, other)| j != i && other.contains(*t)))
            .count();
        total += shared as f64 / own.len() as f64;
    }
    total / lines.len() as f64
}
