use serde::{Deserialize, Serialize};

/// A time interval with independently open or closed endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Span {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    /// `[lo, hi)`.
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: false }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, t: f64) -> bool {
        (t > self.lo || (self.lo_closed && t == self.lo)) && (t < self.hi || (self.hi_closed && t == self.hi))
    }

    fn intersect(&self, o: &Span) -> Span {
        let (lo, lo_closed) = if self.lo > o.lo {
            (self.lo, self.lo_closed)
        } else if o.lo > self.lo {
            (o.lo, o.lo_closed)
        } else {
            (self.lo, self.lo_closed && o.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < o.hi {
            (self.hi, self.hi_closed)
        } else if o.hi < self.hi {
            (o.hi, o.hi_closed)
        } else {
            (self.hi, self.hi_closed && o.hi_closed)
        };
        Span { lo, hi, lo_closed, hi_closed }
    }
}

/// Set of times in `[0, horizon]` where a Boolean signal is true, kept as
/// sorted, disjoint, non-adjacent spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoolSignal {
    spans: Vec<Span>,
    horizon: f64,
}

impl BoolSignal {
    /// Builds a signal from arbitrary spans, clipping to `[0, horizon]` and
    /// merging overlaps.
    pub fn from_spans(spans: impl IntoIterator<Item = Span>, horizon: f64) -> Self {
        let dom = Span::closed(0.0, horizon);
        let mut v: Vec<Span> = spans.into_iter().map(|s| s.intersect(&dom)).filter(|s| !s.is_empty()).collect();
        v.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        let mut out: Vec<Span> = Vec::with_capacity(v.len());
        for s in v {
            if let Some(last) = out.last_mut() {
                let touches = s.lo < last.hi || (s.lo == last.hi && (last.hi_closed || s.lo_closed));
                if touches {
                    if s.hi > last.hi {
                        last.hi = s.hi;
                        last.hi_closed = s.hi_closed;
                    } else if s.hi == last.hi {
                        last.hi_closed |= s.hi_closed;
                    }
                    continue;
                }
            }
            out.push(s);
        }
        Self { spans: out, horizon }
    }

    pub fn always(horizon: f64) -> Self {
        Self { spans: vec![Span::closed(0.0, horizon)], horizon }
    }

    pub fn never(horizon: f64) -> Self {
        Self { spans: Vec::new(), horizon }
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Truth value at `t`; false outside `[0, horizon]`.
    pub fn at(&self, t: f64) -> bool {
        let k = self.spans.partition_point(|s| s.hi < t);
        self.spans.get(k).is_some_and(|s| s.contains(t))
    }

    /// Pointwise negation within `[0, horizon]`.
    pub fn not(&self) -> Self {
        let mut out = Vec::with_capacity(self.spans.len() + 1);
        let mut lo = 0.0;
        let mut lo_closed = true;
        for s in &self.spans {
            out.push(Span { lo, hi: s.lo, lo_closed, hi_closed: !s.lo_closed });
            lo = s.hi;
            lo_closed = !s.hi_closed;
        }
        out.push(Span { lo, hi: self.horizon, lo_closed, hi_closed: true });
        out.retain(|s| !s.is_empty());
        Self { spans: out, horizon: self.horizon }
    }

    pub fn and(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (a, b) = (&self.spans, &other.spans);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let s = a[i].intersect(&b[j]);
            if !s.is_empty() {
                out.push(s);
            }
            // advance whichever ends first
            let a_first = a[i].hi < b[j].hi || (a[i].hi == b[j].hi && !a[i].hi_closed);
            if a_first {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::from_spans(out, self.horizon.min(other.horizon))
    }

    pub fn or(&self, other: &Self) -> Self {
        Self::from_spans(self.spans.iter().chain(&other.spans).copied(), self.horizon.max(other.horizon))
    }

    /// Times `t` with some `t' ∈ [t+a, t+b]` where `psi` holds and `self`
    /// holds on `[t, t')`.
    pub fn until(&self, psi: &Self, a: f64, b: Option<f64>) -> Self {
        let mut out = Vec::new();
        if a == 0.0 {
            out.extend_from_slice(&psi.spans);
        }
        for j in &self.spans {
            // t ∈ J and t' ≤ sup J; t' may equal sup J even if J is open there
            let cap = Span { lo: f64::NEG_INFINITY, hi: j.hi, lo_closed: false, hi_closed: true };
            let first = psi.spans.partition_point(|k| k.hi < j.lo + a);
            for k in &psi.spans[first..] {
                if k.lo > j.hi {
                    break;
                }
                let reach = k.intersect(&cap);
                if reach.is_empty() {
                    continue;
                }
                // {t' - s : t' ∈ reach, s ∈ [a, b]}
                let back = match b {
                    Some(b) => Span { lo: reach.lo - b, lo_closed: reach.lo_closed, hi: reach.hi - a, hi_closed: reach.hi_closed },
                    None => Span { lo: f64::NEG_INFINITY, lo_closed: false, hi: reach.hi - a, hi_closed: reach.hi_closed },
                };
                let s = j.intersect(&back);
                if !s.is_empty() {
                    out.push(s);
                }
            }
        }
        Self::from_spans(out, self.horizon.min(psi.horizon))
    }
}
