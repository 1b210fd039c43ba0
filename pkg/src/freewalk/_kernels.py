"""Compiled inner loops for walks on the Cayley tree.

A step distribution is encoded as ``table[i, :lens[i]]``: the signed letters
of the i-th support word.  ``choices`` holds support indices, one per step.
The current position is kept as a stack of letters; a letter either cancels
the top of the stack or is pushed.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _capacity(table, choices):
    return choices.shape[0] * table.shape[1] + 1


@njit(cache=True, nogil=True)
def path_lengths(table, lens, choices):
    """|w_n| for n = 0..N."""
    n_steps = choices.shape[0]
    stack = np.empty(_capacity(table, choices), np.int8)
    out = np.empty(n_steps + 1, np.int64)
    h = 0
    out[0] = 0
    for n in range(n_steps):
        c = choices[n]
        for j in range(lens[c]):
            x = table[c, j]
            if h > 0 and stack[h - 1] == -x:
                h -= 1
            else:
                stack[h] = x
                h += 1
        out[n + 1] = h
    return out


@njit(cache=True, nogil=True)
def word_after(table, lens, choices, upto):
    """Reduced letters of w_upto."""
    stack = np.empty(_capacity(table, choices), np.int8)
    h = 0
    for n in range(upto):
        c = choices[n]
        for j in range(lens[c]):
            x = table[c, j]
            if h > 0 and stack[h - 1] == -x:
                h -= 1
            else:
                stack[h] = x
                h += 1
    return stack[:h].copy()


@njit(cache=True, nogil=True)
def agreement(table, lens, choices, ref):
    """(|w_n|, common prefix length of w_n with ref) for n = 0..N."""
    n_steps = choices.shape[0]
    nref = ref.shape[0]
    stack = np.empty(_capacity(table, choices), np.int8)
    lengths = np.empty(n_steps + 1, np.int64)
    agree = np.empty(n_steps + 1, np.int64)
    h = 0
    a = 0
    lengths[0] = 0
    agree[0] = 0
    for n in range(n_steps):
        c = choices[n]
        for j in range(lens[c]):
            x = table[c, j]
            if h > 0 and stack[h - 1] == -x:
                h -= 1
                if a > h:
                    a = h
            else:
                stack[h] = x
                if a == h and h < nref and ref[h] == x:
                    a += 1
                h += 1
        lengths[n + 1] = h
        agree[n + 1] = a
    return lengths, agree


@njit(cache=True, nogil=True)
def confirmed(table, lens, choices, nstar):
    """(w_nstar, longest prefix of w_nstar retained by every w_n with n >= nstar)."""
    n_steps = choices.shape[0]
    stack = np.empty(_capacity(table, choices), np.int8)
    h = 0
    for n in range(nstar):
        c = choices[n]
        for j in range(lens[c]):
            x = table[c, j]
            if h > 0 and stack[h - 1] == -x:
                h -= 1
            else:
                stack[h] = x
                h += 1
    ref = stack[:h].copy()
    nref = h
    a = h
    low = h
    for n in range(nstar, n_steps):
        c = choices[n]
        for j in range(lens[c]):
            x = table[c, j]
            if h > 0 and stack[h - 1] == -x:
                h -= 1
                if a > h:
                    a = h
            else:
                stack[h] = x
                if a == h and h < nref and ref[h] == x:
                    a += 1
                h += 1
        # only positions between steps count, not letters mid-step
        if a < low:
            low = a
    return ref, low


@njit(cache=True, nogil=True)
def first_return(proj, mods, choices, pos):
    """Index (1-based) of the first step after which ``pos`` is back at 0, else -1.

    ``proj[i]`` is the image of the i-th support word; coordinates with a
    positive ``mods`` entry are reduced modulo it.  ``pos`` is updated in place.
    """
    j = pos.shape[0]
    for n in range(choices.shape[0]):
        c = choices[n]
        zero = True
        for i in range(j):
            pos[i] += proj[c, i]
            if mods[i] > 0:
                pos[i] %= mods[i]
            if pos[i] != 0:
                zero = False
        if zero:
            return n + 1
    return -1
