"""A small reduced ordered BDD package (no complement edges).

Nodes are integers; 0 and 1 are the terminals.  Variables are integers
ordered by value.  Only what the fixpoint solver needs is provided.
"""
from __future__ import annotations

from typing import Iterable

FALSE = 0
TRUE = 1


class BDD:
    def __init__(self, nvars: int):
        self.nvars = nvars
        self._var = [nvars, nvars]
        self._lo = [0, 1]
        self._hi = [0, 1]
        self._unique: dict[tuple[int, int, int], int] = {}
        self._apply_cache: dict[tuple[str, int, int], int] = {}
        self._not_cache: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self._var)

    def mk(self, v: int, lo: int, hi: int) -> int:
        if lo == hi:
            return lo
        key = (v, lo, hi)
        u = self._unique.get(key)
        if u is None:
            u = len(self._var)
            self._var.append(v)
            self._lo.append(lo)
            self._hi.append(hi)
            self._unique[key] = u
        return u

    def var(self, v: int) -> int:
        return self.mk(v, FALSE, TRUE)

    def top_var(self, u: int) -> int:
        return self._var[u]

    # -- boolean operations ------------------------------------------------------

    def neg(self, u: int) -> int:
        if u <= 1:
            return 1 - u
        r = self._not_cache.get(u)
        if r is None:
            r = self.mk(self._var[u], self.neg(self._lo[u]), self.neg(self._hi[u]))
            self._not_cache[u] = r
        return r

    def apply(self, op: str, u: int, v: int) -> int:
        if op == "and":
            if u == 0 or v == 0:
                return 0
            if u == 1:
                return v
            if v == 1 or u == v:
                return u
        elif op == "or":
            if u == 1 or v == 1:
                return 1
            if u == 0:
                return v
            if v == 0 or u == v:
                return u
        elif op == "iff":
            if u == v:
                return 1
            if u == 1:
                return v
            if v == 1:
                return u
            if u == 0:
                return self.neg(v)
            if v == 0:
                return self.neg(u)
        else:
            raise ValueError(op)
        if u > v:
            u, v = v, u
        key = (op, u, v)
        r = self._apply_cache.get(key)
        if r is not None:
            return r
        vu, vv = self._var[u], self._var[v]
        top = min(vu, vv)
        u0, u1 = (self._lo[u], self._hi[u]) if vu == top else (u, u)
        v0, v1 = (self._lo[v], self._hi[v]) if vv == top else (v, v)
        r = self.mk(top, self.apply(op, u0, v0), self.apply(op, u1, v1))
        self._apply_cache[key] = r
        return r

    def conj(self, us: Iterable[int]) -> int:
        r = TRUE
        for u in us:
            r = self.apply("and", r, u)
            if r == FALSE:
                break
        return r

    def disj(self, us: Iterable[int]) -> int:
        r = FALSE
        for u in us:
            r = self.apply("or", r, u)
            if r == TRUE:
                break
        return r

    def implies(self, u: int, v: int) -> int:
        return self.apply("or", self.neg(u), v)

    def iff(self, u: int, v: int) -> int:
        return self.apply("iff", u, v)

    # -- quantification and substitution -------------------------------------------

    def exists(self, u: int, variables: Iterable[int]) -> int:
        vs = frozenset(variables)
        cache: dict[int, int] = {}

        def go(w: int) -> int:
            if w <= 1:
                return w
            r = cache.get(w)
            if r is None:
                lo, hi = go(self._lo[w]), go(self._hi[w])
                if self._var[w] in vs:
                    r = self.apply("or", lo, hi)
                else:
                    r = self.mk(self._var[w], lo, hi)
                cache[w] = r
            return r

        return go(u)

    def and_exists(self, u: int, v: int, variables: Iterable[int]) -> int:
        """Relational product: exists variables . u & v."""
        vs = frozenset(variables)
        cache: dict[tuple[int, int], int] = {}

        def go(a: int, b: int) -> int:
            if a == 0 or b == 0:
                return 0
            if a == 1 and b == 1:
                return 1
            if a > b:
                a, b = b, a
            key = (a, b)
            r = cache.get(key)
            if r is not None:
                return r
            va, vb = self._var[a], self._var[b]
            top = min(va, vb)
            a0, a1 = (self._lo[a], self._hi[a]) if va == top else (a, a)
            b0, b1 = (self._lo[b], self._hi[b]) if vb == top else (b, b)
            if top in vs:
                lo = go(a0, b0)
                r = 1 if lo == 1 else self.apply("or", lo, go(a1, b1))
            else:
                r = self.mk(top, go(a0, b0), go(a1, b1))
            cache[key] = r
            return r

        return go(u, v)

    def rename(self, u: int, mapping: dict[int, int]) -> int:
        """Rename variables; the mapping must preserve their relative order."""
        cache: dict[int, int] = {}

        def go(w: int) -> int:
            if w <= 1:
                return w
            r = cache.get(w)
            if r is None:
                v = self._var[w]
                r = self.mk(mapping.get(v, v), go(self._lo[w]), go(self._hi[w]))
                cache[w] = r
            return r

        return go(u)

    def restrict(self, u: int, assignment: dict[int, bool]) -> int:
        cache: dict[int, int] = {}

        def go(w: int) -> int:
            if w <= 1:
                return w
            r = cache.get(w)
            if r is None:
                v = self._var[w]
                if v in assignment:
                    r = go(self._hi[w] if assignment[v] else self._lo[w])
                else:
                    r = self.mk(v, go(self._lo[w]), go(self._hi[w]))
                cache[w] = r
            return r

        return go(u)

    # -- inspection ----------------------------------------------------------------

    def evaluate(self, u: int, assignment: dict[int, bool]) -> bool:
        while u > 1:
            u = self._hi[u] if assignment.get(self._var[u], False) else self._lo[u]
        return u == TRUE

    def pick(self, u: int) -> dict[int, bool] | None:
        """The satisfying assignment that is least in lexicographic order
        (variables absent from the result are false)."""
        if u == FALSE:
            return None
        out: dict[int, bool] = {}
        while u > 1:
            v = self._var[u]
            if self._lo[u] != FALSE:
                out[v] = False
                u = self._lo[u]
            else:
                out[v] = True
                u = self._hi[u]
        return out

    def count(self, u: int, variables: list[int]) -> int:
        """Number of satisfying assignments over ``variables`` (sorted)."""
        pos = {v: i for i, v in enumerate(variables)}
        n = len(variables)
        cache: dict[int, int] = {}

        def level(w: int) -> int:
            return n if w <= 1 else pos[self._var[w]]

        def go(w: int) -> int:
            if w <= 1:
                return w
            r = cache.get(w)
            if r is None:
                lw = level(w)
                lo, hi = self._lo[w], self._hi[w]
                r = go(lo) * 2 ** (level(lo) - lw - 1) + go(hi) * 2 ** (level(hi) - lw - 1)
                cache[w] = r
            return r

        return go(u) * 2 ** level(u)

    def dag_size(self, u: int) -> int:
        seen: set[int] = set()
        stack = [u]
        while stack:
            w = stack.pop()
            if w <= 1 or w in seen:
                continue
            seen.add(w)
            stack += [self._lo[w], self._hi[w]]
        return len(seen)

    def support(self, u: int) -> set[int]:
        seen: set[int] = set()
        out: set[int] = set()
        stack = [u]
        while stack:
            w = stack.pop()
            if w <= 1 or w in seen:
                continue
            seen.add(w)
            out.add(self._var[w])
            stack += [self._lo[w], self._hi[w]]
        return out
