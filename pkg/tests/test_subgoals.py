import math
import random

import numpy as np
import pytest

from semnav.geometry import Pose
from semnav.subgoals import (
    LexicalScorer,
    PlannerParams,
    score_relevance,
    select_subgoal,
    select_subgoal_probability_only,
    tokenize,
)
from semnav.topomap import MapConfig, TopoMap

ORIGIN = Pose.from_xy(0, 0, 0)


def build_map(children):
    """children: list of (x, y, label, confidence, explore_prob)."""
    m = TopoMap(np.zeros(3), MapConfig(min_node_spacing=0.2, knn=3, edge_radius=50.0))
    for x, y, label, conf, explore in children:
        nid = m.insert_point(np.array([x, y, 0.0]), label, conf)
        m.nodes[nid].explore_prob = explore
    return m


# ---------------------------------------------------------------------------
# lexical relevance
# ---------------------------------------------------------------------------

def test_direct_token_match_scores_high():
    scorer = LexicalScorer()
    s = score_relevance(scorer, "find the fire extinguisher", ["extinguisher"], [])
    assert s[0] >= 0.8


def test_disjoint_label_scores_zero():
    scorer = LexicalScorer()
    s = score_relevance(scorer, "find the fire extinguisher", ["banana"], [])
    assert s[0] == 0.0


def test_partial_overlap():
    scorer = LexicalScorer()
    s = score_relevance(scorer, "find the fire extinguisher", ["fire hydrant"], [])
    assert s[0] == pytest.approx(0.5)


def test_visited_penalty():
    scorer = LexicalScorer()
    fresh = score_relevance(scorer, "find the bin", ["bin"], [])[0]
    seen = score_relevance(scorer, "find the bin", ["bin"], ["bin"])[0]
    assert seen == pytest.approx(fresh - 0.3)


def test_synonym_sweep_matches_independent_rule():
    synonyms = {"sofa": ["couch", "settee"], "bin": ["trashcan"]}
    scorer = LexicalScorer(synonyms)
    labels = ["couch", "settee", "trashcan", "sofa", "table", "bin bag"]
    instruction = "walk to the sofa then the bin"
    history = ["settee"]
    got = score_relevance(scorer, instruction, labels, history)

    # independent reimplementation of the stated rule
    inst_tokens = set(tokenize(instruction))
    syn = {k: set(v) for k, v in synonyms.items()}
    expected = []
    for label in labels:
        toks = tokenize(label)
        base = sum(1 for t in set(toks) if t in inst_tokens) / len(toks)
        hit = any(syn.get(t, set()) & set(toks) for t in inst_tokens) or any(
            syn.get(t, set()) & inst_tokens for t in toks)
        if hit:
            base += 0.2
        if label in history:
            base -= 0.3
        expected.append(min(1.0, max(0.0, base)))
    assert got == pytest.approx(expected)


def test_score_relevance_validates():
    class BadScorer:
        def score(self, instruction, labels, history):
            return [0.5]

    with pytest.raises(ValueError):
        score_relevance(BadScorer(), "x", ["a", "b"], [])
    with pytest.raises(ValueError):
        score_relevance(LexicalScorer(), "x", [], [])

    class WildScorer:
        def score(self, instruction, labels, history):
            return [5.0, -3.0]

    assert score_relevance(WildScorer(), "x", ["a", "b"], []) == [1.0, 0.0]


# ---------------------------------------------------------------------------
# subgoal selection
# ---------------------------------------------------------------------------

def test_gamma_zero_ignores_distance():
    m = build_map([
        (12.0, 0.0, "a", 0.5, 0.9),   # far but strong
        (1.0, 0.0, "b", 0.3, 0.9),    # near but weak
    ])
    scores = {nid: 1.0 for nid in m.nodes}
    sg = select_subgoal(m, ORIGIN, scores, PlannerParams(distance_decay=0.0))
    assert m.nodes[sg.node_id].label == "a"


def test_single_qualifying_candidate_selected():
    m = build_map([
        (3.0, 0.0, "a", 0.9, 0.01),   # below threshold
        (6.0, 0.0, "b", 0.1, 0.5),
    ])
    scores = {nid: 0.0 for nid in m.nodes}
    sg = select_subgoal(m, ORIGIN, scores, PlannerParams(explore_threshold=0.05))
    assert m.nodes[sg.node_id].label == "b"


def test_exhausted_when_no_candidates():
    m = build_map([(3.0, 0.0, "a", 0.9, 0.01)])
    assert select_subgoal(m, ORIGIN, {}, PlannerParams()) is None
    assert select_subgoal_probability_only(m, ORIGIN, PlannerParams()) is None


def test_selected_node_clears_threshold():
    rng = random.Random(0)
    for _ in range(50):
        m = build_map([
            (rng.uniform(-10, 10), rng.uniform(-10, 10), f"l{i}",
             rng.uniform(0.1, 1.0), rng.uniform(0.0, 1.0))
            for i in range(rng.randint(1, 8))
        ])
        params = PlannerParams(explore_threshold=rng.uniform(0.0, 0.6))
        scores = {nid: rng.random() for nid in m.nodes}
        sg = select_subgoal(m, ORIGIN, scores, params)
        if sg is not None:
            assert m.nodes[sg.node_id].explore_prob > params.explore_threshold


def brute_force_select(m, robot, scores, params):
    """Plain-loop reading of the joint-score rule, with explicit tie rules."""
    best = None
    for n in m.children():
        if n.explore_prob <= params.explore_threshold:
            continue
        d = m.traversal_cost(robot, n.id)
        joint = scores.get(n.id, 0.0) * n.confidence * math.exp(-params.distance_decay * d)
        entry = (joint, d, n.id)
        if best is None:
            best = entry
        elif (entry[0] > best[0]
              or (entry[0] == best[0]
                  and (entry[1] < best[1]
                       or (entry[1] == best[1] and entry[2] < best[2])))):
            best = entry
    return best


def test_matches_brute_force_on_random_maps():
    rng = random.Random(123)
    for _ in range(200):
        m = build_map([
            (rng.uniform(-10, 10), rng.uniform(-10, 10), f"l{i}",
             round(rng.uniform(0.1, 1.0), 3), round(rng.uniform(0.0, 1.0), 3))
            for i in range(rng.randint(1, 10))
        ])
        robot = Pose.from_xy(rng.uniform(-3, 3), rng.uniform(-3, 3), 0)
        params = PlannerParams(distance_decay=rng.choice([0.0, 0.1, 0.2, 0.5]),
                               explore_threshold=0.05)
        scores = {nid: round(rng.random(), 3) for nid in m.nodes}
        expected = brute_force_select(m, robot, scores, params)
        got = select_subgoal(m, robot, scores, params)
        if expected is None:
            assert got is None
        else:
            assert got.node_id == expected[2]
            assert got.joint == pytest.approx(expected[0], abs=1e-12)


def test_gamma_limit_selects_nearest():
    m = build_map([
        (2.0, 0.0, "near", 0.2, 0.9),
        (9.0, 0.0, "far", 0.95, 0.9),
    ])
    scores = {nid: 1.0 for nid in m.nodes}
    sg = select_subgoal(m, ORIGIN, scores, PlannerParams(distance_decay=1e6))
    assert m.nodes[sg.node_id].label == "near"
    # moderate decay already flips the choice relative to gamma = 0
    sg0 = select_subgoal(m, ORIGIN, scores, PlannerParams(distance_decay=0.0))
    assert m.nodes[sg0.node_id].label == "far"


def test_relevance_scale_invariance():
    rng = random.Random(5)
    m = build_map([
        (rng.uniform(-10, 10), rng.uniform(-10, 10), f"l{i}",
         rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0))
        for i in range(6)
    ])
    scores = {nid: rng.random() for nid in m.nodes}
    sg1 = select_subgoal(m, ORIGIN, scores, PlannerParams())
    # scaling all relevances cannot change the winner (clamping aside)
    scaled = {nid: 0.31 * s for nid, s in scores.items()}
    sg2 = select_subgoal(m, ORIGIN, scaled, PlannerParams())
    assert sg1.node_id == sg2.node_id


def test_probability_only_ranking():
    m = build_map([
        (8.0, 0.0, "a", 0.9, 0.9),
        (1.0, 0.0, "b", 0.4, 0.9),
    ])
    sg = select_subgoal_probability_only(m, ORIGIN, PlannerParams())
    assert m.nodes[sg.node_id].label == "a"


def test_probability_only_matches_brute_force():
    rng = random.Random(77)
    for _ in range(100):
        m = build_map([
            (rng.uniform(-10, 10), rng.uniform(-10, 10), f"l{i}",
             round(rng.uniform(0.1, 1.0), 3), round(rng.uniform(0.0, 1.0), 3))
            for i in range(rng.randint(1, 8))
        ])
        params = PlannerParams()
        best = None
        for n in m.children():
            if n.explore_prob <= params.explore_threshold:
                continue
            d = m.traversal_cost(ORIGIN, n.id)
            e = (n.confidence, d, n.id)
            if best is None or e[0] > best[0] or (
                    e[0] == best[0] and (e[1] < best[1]
                                         or (e[1] == best[1] and e[2] < best[2]))):
                best = e
        got = select_subgoal_probability_only(m, ORIGIN, params)
        if best is None:
            assert got is None
        else:
            assert got.node_id == best[2]
