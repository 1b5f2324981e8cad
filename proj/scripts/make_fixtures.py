#!/usr/bin/env python3
"""Regenerates data/fixtures/ from a fixed seed.

The corpus is synthetic: English references are sampled from the toy grammar's
lexicon with a small phrase generator, the "source" side is a word-for-word
pseudo-French rendering, and the model outputs are perturbed references with
scores that penalize the perturbations.
"""

import random
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "fixtures"

DET = ["the", "a", "this", "that", "every", "some"]
NOUN = ["cat", "dog", "mat", "situation", "paradox", "parliament", "commission", "report", "proposal",
        "question", "debate", "member", "president", "problem", "time", "law", "country", "day", "week"]
PLURAL = ["members", "countries", "citizens"]
NAME = ["europe", "france", "brussels", "strasbourg"]
PRON = ["it", "i", "you", "we", "they"]
ADJ = ["grotesque", "important", "right", "new", "european", "good", "clear", "difficult", "political"]
ADV = ["quite", "very", "also", "now", "really"]
VI = ["sleeps", "sleep", "repeat", "agree", "vote", "speak", "works", "exist"]
VT = ["sees", "see", "support", "supports", "welcome", "reject", "thank"]
COP = ["is", "are", "was", "were"]
PREP = ["on", "in", "of", "for", "with", "to", "about"]
CARD = ["two", "three", "ten"]
CONJ = ["and", "but"]
UNKNOWN = ["kafkaesque", "bureaucrats", "xenial", "quorum"]

FRENCH = {
    "the": "le", "a": "un", "this": "ce", "that": "cette", "every": "chaque", "some": "quelques",
    "cat": "chat", "dog": "chien", "mat": "tapis", "situation": "situation", "paradox": "paradoxe",
    "parliament": "parlement", "commission": "commission", "report": "rapport", "proposal": "proposition",
    "question": "question", "debate": "debat", "member": "membre", "members": "membres",
    "president": "president", "problem": "probleme", "time": "temps", "law": "loi", "country": "pays",
    "countries": "pays", "citizens": "citoyens", "day": "jour", "week": "semaine", "europe": "europe",
    "france": "france", "brussels": "bruxelles", "strasbourg": "strasbourg", "it": "il", "i": "je",
    "you": "vous", "we": "nous", "they": "ils", "grotesque": "grotesque", "important": "important",
    "right": "juste", "new": "nouveau", "european": "europeen", "good": "bon", "clear": "clair",
    "difficult": "difficile", "political": "politique", "quite": "assez", "very": "tres",
    "also": "aussi", "now": "maintenant", "really": "vraiment", "sleeps": "dort", "sleep": "dorment",
    "repeat": "repete", "agree": "accepte", "vote": "vote", "speak": "parle", "works": "fonctionne",
    "exist": "existe", "sees": "voit", "see": "voient", "support": "soutiens", "supports": "soutient",
    "welcome": "salue", "reject": "rejette", "thank": "remercie", "is": "est", "are": "sont",
    "was": "etait", "were": "etaient", "on": "sur", "in": "dans", "of": "de", "for": "pour",
    "with": "avec", "to": "a", "about": "sur", "two": "deux", "three": "trois", "ten": "dix",
    "and": "et", "but": "mais", "kafkaesque": "kafkaien", "bureaucrats": "bureaucrates",
    "xenial": "hospitalier", "quorum": "quorum", ".": ".", "!": "!", "?": "?", ";": ";",
}


class Generator:
    def __init__(self, rng):
        self.r = rng

    def pick(self, xs):
        return xs[self.r.randrange(len(xs))]

    def nbar(self):
        words = []
        while self.r.random() < 0.3 and len(words) < 2:
            if self.r.random() < 0.3:
                words.append(self.pick(ADV))
            words.append(self.pick(ADJ))
        return words + [self.pick(NOUN)]

    def np(self, depth=0):
        x = self.r.random()
        if x < 0.45:
            out = [self.pick(DET)] + self.nbar()
        elif x < 0.6:
            out = [self.pick(PRON)]
        elif x < 0.7:
            out = [self.pick(NAME)]
        elif x < 0.8:
            out = [self.pick(CARD), self.pick(PLURAL)]
        elif x < 0.9:
            out = [self.pick(PLURAL)]
        else:
            out = [self.pick(NAME), self.pick(NOUN)]
        if depth < 1 and self.r.random() < 0.15:
            out += self.pp(depth + 1)
        return out

    def pp(self, depth=0):
        return [self.pick(PREP)] + self.np(depth + 1)

    def vp(self, depth=0):
        x = self.r.random()
        if x < 0.3:
            out = [self.pick(VI)]
        elif x < 0.6:
            out = [self.pick(VT)] + self.np(depth + 1)
        elif x < 0.75:
            out = [self.pick(COP)] + ([self.pick(ADV)] if self.r.random() < 0.3 else []) + [self.pick(ADJ)]
        else:
            out = [self.pick(COP)] + self.np(depth + 1)
        if self.r.random() < 0.1:
            out = [self.pick(ADV)] + out
        if depth < 1 and self.r.random() < 0.2:
            out += self.pp(depth + 1)
        return out

    def clause(self, depth=0):
        out = self.np() + self.vp()
        if depth < 1:
            x = self.r.random()
            if x < 0.1:
                out += [self.pick(CONJ)] + self.clause(depth + 1)
            elif x < 0.15:
                out += [";"] + self.clause(depth + 1)
        return out

    def sentence(self):
        x = self.r.random()
        if x < 0.85:
            words = self.clause()
        elif x < 0.93:
            words = self.np()
        elif x < 0.97:
            words = self.pp()
        else:
            words = self.vp()
        if self.r.random() < 0.5:
            words[0] = words[0].capitalize()
            words.append(self.pick([".", ".", ".", "!", "?"]))
        elif self.r.random() < 0.3:
            words.append(".")
        return words


def french(words):
    return [FRENCH.get(w.lower(), w.lower() + "e") for w in words]


def perturb(rng, gen, words):
    """Returns the model output and the number of edits applied."""
    out = list(words)
    edits = 0
    x = rng.random()
    if x < 0.55 or len(out) < 3:
        pass
    elif x < 0.68:
        del out[rng.randrange(len(out))]
        edits = 1
    elif x < 0.78:
        i = rng.randrange(len(out) - 1)
        out[i], out[i + 1] = out[i + 1], out[i]
        edits = 1
    elif x < 0.88:
        nouns = [i for i, w in enumerate(out) if w in NOUN]
        if nouns:
            out[rng.choice(nouns)] = gen.pick(NOUN)
        edits = 0
    elif x < 0.94:
        if out[-1] in {".", "!", "?"}:
            out.pop()
        out[0] = out[0].lower()
    elif x < 0.97:
        out.insert(rng.randrange(len(out)), gen.pick(DET))
        edits = 1
    else:
        out[rng.randrange(len(out))] = gen.pick(UNKNOWN)
        edits = 1
    return out, edits


def main():
    rng = random.Random(20180601)
    gen = Generator(rng)
    en, fr, hyp, scores = [], [], [], []
    for i in range(600):
        if i in (17, 301):
            # empty source lines; the reference still parses
            words = gen.sentence()
            en.append(words)
            fr.append([])
            hyp.append(list(words))
            scores.append(-2.0 - 0.9 * len(words))
            continue
        words = gen.sentence()
        y = rng.random()
        if y < 0.04:
            words[rng.randrange(len(words))] = gen.pick(UNKNOWN)  # reference parser error
        elif y < 0.09 and len(words) > 2:
            rng.shuffle(words)  # usually exhausted
        out, edits = perturb(rng, gen, words)
        en.append(words)
        fr.append(french(words))
        hyp.append(out)
        lp = -(0.9 * len(out) + 2.5 * edits + abs(rng.gauss(0.0, 1.0)))
        scores.append(None if rng.random() < 0.02 else round(lp, 4))

    OUT.mkdir(parents=True, exist_ok=True)

    def lines(path, rows):
        path.write_text("".join(" ".join(r) + "\n" for r in rows), encoding="utf-8")

    lines(OUT / "corpus.en", en)
    lines(OUT / "corpus.fr", fr)
    lines(OUT / "corpus.hyp", hyp)
    (OUT / "corpus.scores").write_text("".join(("" if s is None else repr(s)) + "\n" for s in scores))

    (OUT / "rule_descriptions.tsv").write_text(
        "sb-hd_mc\tsubject-head, main clause\n"
        "sp-hd_n\tspecifier-head, nominal\n"
        "aj-hdn_norm\tadjective-head nominal\n"
        "np-hdn_cpd\tnoun-noun compound\n"
        "hdn_bnp-qnt\tbare NP from a quantifier or pronoun\n"
        "hdn_bnp-pn\tbare NP from a proper name\n"
        "hdn_bnp_c\tbare NP from a common noun\n"
        "num-n_mnp\tnumber-noun measure NP\n"
        "hd_optcmp_c\thead with optional complement omitted\n"
        "hd-cmp_u\thead-complement\n"
        "aj-hd_int\tintersective adjunct-head\n"
        "hd-aj_int-unsl\thead-adjunct, intersective, unslashed\n"
        "hdn-aj_redrel\tnominal head with reduced relative\n"
        "cl-cl_runon\trun-on clauses\n"
        "cl-cl_crd-t\tcoordinated clauses\n"
        "mrk-nh_cl\tconjunction marking a clause\n"
        "np_frg\tNP fragment\n"
        "vp_frg\tVP fragment\n"
        "pp_frg\tPP fragment\n")

    # Annotation fixture shaped like the 100-sentence manual study:
    # 60 ungrammatical (5 subject-verb only, 5 NP only, 1 both), 35 grammatical, 5 excluded.
    rows = ["id\ttext\tgrammatical\tsv_agreement_error\tnp_agreement_error\texcluded\texclusion_reason"]
    for i in range(100):
        if i < 35:
            rows.append(f"{i}\tsentence {i}\t1\t0\t0\t0\t")
        elif i < 95:
            k = i - 35
            sv = 1 if k < 5 or k == 10 else 0
            np_ = 1 if 5 <= k < 11 else 0
            rows.append(f"{i}\tsentence {i}\t0\t{sv}\t{np_}\t0\t")
        else:
            reason = "empty source" if i < 97 else "session information"
            rows.append(f"{i}\tsentence {i}\t\t\t\t1\t{reason}")
    (OUT / "annotation_sample.tsv").write_text("\n".join(rows) + "\n")

    # Four-record derivation corpora for the root-condition table.
    (OUT / "roots4_ref.jsonl").write_text(
        '{"id":0,"outcome":"parseable","root":"root_strict","tree":["sb-hd_mc",["hdn_bnp-qnt",{"le":"pron","token":"It"}],["hd_optcmp_c",{"le":"verb","token":"works"}]],"lexentries":["pron","verb"]}\n'
        '{"id":1,"outcome":"parseable","root":"root_informal","tree":["sb-hd_mc",["hdn_bnp-qnt",{"le":"pron","token":"it"}],["hd_optcmp_c",{"le":"verb","token":"works"}]],"lexentries":["pron","verb"]}\n'
        '{"id":2,"outcome":"parseable","root":"root_frag","tree":["np_frg",["hdn_bnp-pn",{"le":"name","token":"Europe"}]],"lexentries":["name"]}\n'
        '{"id":3,"outcome":"parseable","root":"root_strict","tree":["sb-hd_mc",["hdn_bnp-qnt",{"le":"pron","token":"We"}],["hd_optcmp_c",{"le":"verb","token":"agree"}]],"lexentries":["pron","verb"]}\n')
    (OUT / "roots4_nmt.jsonl").write_text(
        '{"id":0,"outcome":"parseable","root":"root_strict","tree":["sb-hd_mc",["hdn_bnp-qnt",{"le":"pron","token":"It"}],["hd_optcmp_c",{"le":"verb","token":"works"}]],"lexentries":["pron","verb"]}\n'
        '{"id":1,"outcome":"parseable","root":"root_informal","tree":["sb-hd_mc",["hdn_bnp-qnt",{"le":"pron","token":"it"}],["hd_optcmp_c",{"le":"verb","token":"works"}]],"lexentries":["pron","verb"]}\n'
        '{"id":2,"outcome":"exhausted","root":null,"tree":null}\n'
        '{"id":3,"outcome":"parseable","root":"root_strict","tree":["sb-hd_mc",["hdn_bnp-qnt",{"le":"pron","token":"We"}],["hd_optcmp_c",{"le":"verb","token":"agree"}]],"lexentries":["pron","verb"]}\n')
    return 0


if __name__ == "__main__":
    sys.exit(main())
