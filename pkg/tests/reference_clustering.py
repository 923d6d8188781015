"""Slow, loop-based reference implementations used as test oracles.

Everything here is written independently of the package internals: plain
python lists, no shared helpers, distances recomputed from scratch on every
round.  The only intentional couplings are the tie-break conventions, which
are part of the clustering contract: beam promotion wins when d_beam equals
the best pair distance, and among equal pair distances the first (i, j) in
row-major order is merged.
"""

import math


def _phi_diff(a, b):
    d = a - b
    while d > math.pi:
        d -= 2.0 * math.pi
    while d < -math.pi:
        d += 2.0 * math.pi
    return d


class RefJet:
    def __init__(self, e, px, py, pz, indices):
        self.e = e
        self.px = px
        self.py = py
        self.pz = pz
        self.indices = indices

    @property
    def pt(self):
        return math.hypot(self.px, self.py)

    @property
    def phi(self):
        return math.atan2(self.py, self.px)

    @property
    def eta(self):
        p = math.sqrt(self.px ** 2 + self.py ** 2 + self.pz ** 2)
        if p == abs(self.pz):
            return math.copysign(1e10, self.pz)
        return 0.5 * math.log((p + self.pz) / (p - self.pz))

    def merged_with(self, other):
        return RefJet(self.e + other.e, self.px + other.px,
                      self.py + other.py, self.pz + other.pz,
                      self.indices + other.indices)


def _from_particle(p, index):
    px = p.pt * math.cos(p.phi)
    py = p.pt * math.sin(p.phi)
    pz = p.pt * math.sinh(p.eta)
    e = math.sqrt(px ** 2 + py ** 2 + pz ** 2 + p.mass ** 2)
    return RefJet(e, px, py, pz, [index])


def ref_cluster(particles, R=1.0, power=-1.0):
    """Generalized-kt clustering by exhaustive search each round."""
    pending = [_from_particle(p, i) for i, p in enumerate(particles)]
    jets = []
    while pending:
        best_beam = None
        for i, jet in enumerate(pending):
            d = jet.pt ** (2.0 * power)
            if best_beam is None or d < best_beam[0]:
                best_beam = (d, i)
        best_pair = None
        for i in range(len(pending)):
            for j in range(i + 1, len(pending)):
                a, b = pending[i], pending[j]
                dr2 = (a.eta - b.eta) ** 2 + _phi_diff(a.phi, b.phi) ** 2
                d = min(a.pt ** (2.0 * power), b.pt ** (2.0 * power)) * dr2 / R ** 2
                if best_pair is None or d < best_pair[0]:
                    best_pair = (d, i, j)
        if best_pair is None or best_beam[0] <= best_pair[0]:
            jets.append(pending.pop(best_beam[1]))
        else:
            _, i, j = best_pair
            merged = pending[i].merged_with(pending[j])
            pending[i] = merged
            pending.pop(j)
    jets.sort(key=lambda j: -j.pt)
    return jets


def ref_exclusive_kt_axes(jet, n_axes, R=1.0):
    """Merge with kt distances (power +1) until n_axes protojets remain."""
    pending = [RefJet(j.e, j.px, j.py, j.pz, list(j.indices))
               for j in (jet if isinstance(jet, list) else [jet])]
    # callers pass a list of single-particle RefJets
    while len(pending) > n_axes:
        best = None
        for i in range(len(pending)):
            for j in range(i + 1, len(pending)):
                a, b = pending[i], pending[j]
                dr2 = (a.eta - b.eta) ** 2 + _phi_diff(a.phi, b.phi) ** 2
                d = min(a.pt ** 2, b.pt ** 2) * dr2 / R ** 2
                if best is None or d < best[0]:
                    best = (d, i, j)
        _, i, j = best
        pending[i] = pending[i].merged_with(pending[j])
        pending.pop(j)
    return pending


def ref_nsubjettiness(constituents, n, R=1.0):
    """Brute-force subjettiness from a list of Particle-like constituents."""
    if len(constituents) < n:
        return None
    protos = [_from_particle(p, i) for i, p in enumerate(constituents)]
    axes = ref_exclusive_kt_axes(protos, n, R)
    total = sum(p.pt for p in constituents)
    if total == 0.0:
        return 0.0
    acc = 0.0
    for p in constituents:
        best = None
        for ax in axes:
            dr = math.sqrt((p.eta - ax.eta) ** 2 + _phi_diff(p.phi, ax.phi) ** 2)
            if best is None or dr < best:
                best = dr
        acc += p.pt * best
    return acc / (R * total)
