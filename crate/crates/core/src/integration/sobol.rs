//! Base-2 Sobol points with random digital shifts.

/// Primitive-polynomial data `(degree, coefficients, initial m_i)` for
/// dimensions 2..=16 (Joe–Kuo "new-joe-kuo-6.21201" table).
const TABLE: [(u32, u32, &[u32]); 15] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

pub const MAX_DIMS: usize = TABLE.len() + 1;
const BITS: usize = 32;

/// Direction numbers for the first `dims` coordinates.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
}

impl Sobol {
    pub fn new(dims: usize) -> Option<Self> {
        if dims == 0 || dims > MAX_DIMS {
            return None;
        }
        let mut directions = Vec::with_capacity(dims);
        let mut first = [0u32; BITS];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - i);
        }
        directions.push(first);
        for &(s, a, m) in TABLE.iter().take(dims - 1) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for i in 0..BITS {
                v[i] = if i < s {
                    m[i] << (BITS - 1 - i)
                } else {
                    let mut x = v[i - s] ^ (v[i - s] >> s);
                    for k in 1..s {
                        if (a >> (s - 1 - k)) & 1 == 1 {
                            x ^= v[i - k];
                        }
                    }
                    x
                };
            }
            directions.push(v);
        }
        Some(Self { directions })
    }

    pub fn dims(&self) -> usize {
        self.directions.len()
    }

    /// Integer coordinates of point `index` (Gray-code order), XOR-ed with
    /// `shift`.
    pub fn point_bits(&self, index: u64, shift: &[u32], out: &mut [u32]) {
        let gray = index ^ (index >> 1);
        for ((slot, dirs), s) in out.iter_mut().zip(&self.directions).zip(shift) {
            let mut x = 0u32;
            let mut g = gray;
            let mut bit = 0;
            while g != 0 && bit < BITS {
                if g & 1 == 1 {
                    x ^= dirs[bit];
                }
                g >>= 1;
                bit += 1;
            }
            *slot = x ^ s;
        }
    }

    /// Point `index` mapped to the open cube: `(x + 1/2) / 2^32`.
    pub fn point(&self, index: u64, shift: &[u32], bits: &mut [u32], out: &mut [f64]) {
        self.point_bits(index, shift, bits);
        for (o, &b) in out.iter_mut().zip(bits.iter()) {
            *o = (b as f64 + 0.5) / 4_294_967_296.0;
        }
    }
}
