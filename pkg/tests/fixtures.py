"""Shared worked examples and helpers for the test suite."""

from __future__ import annotations

from pathfid.corpus import Passage, QuestionInstance, SyntheticConfig, generate_synthetic
from pathfid.pathcodec import Hop, ReasoningPath

MEMPHIS_QUESTION = "The Memphis Hustle are based in a suburb of a city with a population of what in 2010?"
MEMPHIS_PASSAGES = (
    Passage(
        "Memphis Hustle",
        (
            "The Memphis Hustle are an American professional basketball team of the NBA G League announced to begin "
            "play for the 2017–18 season as an affiliate of the Memphis Grizzlies of the National Basketball "
            "Association (NBA).",
            "Based in the Memphis suburb of Southaven, Mississippi, the team will play their home games at the "
            "Landers Center.",
        ),
    ),
    Passage(
        "Southaven, Mississippi",
        (
            "Southaven is a city in DeSoto County, Mississippi, United States.",
            "It is a suburb of Memphis, Tennessee, and a principal city in the Memphis metropolitan area.",
            "The 2010 census reported a population of 48,982, making Southaven the third largest city in Mississippi.",
            "Southaven is traversed from north to south by the I-55/I-69 freeway.",
            "The city's name derives from the fact that Southaven is located south of Whitehaven, a neighborhood "
            "in Memphis.",
        ),
    ),
    Passage(
        "Lakeland, Tennessee",
        (
            "Lakeland is a city in Shelby County, Tennessee, and a suburb of Memphis.",
            "The population was 12,430 at the 2010 census.",
        ),
    ),
    Passage("Marion, Arkansas", ("Marion is a city in and the county seat of Crittenden County, Arkansas.",)),
    Passage("West Memphis, Arkansas", ("West Memphis is the largest city in Crittenden County, Arkansas.",)),
)
MEMPHIS_OUTPUT = (
    "<title-1> Memphis Hustle <facts-1> <f1> <f2> <title-2> Southaven, Mississippi "
    "<facts-2> <f1> <f2> <f3> <answer> 48,982"
)
MEMPHIS_PATH = ReasoningPath(
    (Hop("Memphis Hustle", (1, 2)), Hop("Southaven, Mississippi", (1, 2, 3))),
    "48,982",
)


def memphis_instance() -> QuestionInstance:
    # passages listed with the answer-bearing one first so ordering is not a no-op
    passages = (MEMPHIS_PASSAGES[1], MEMPHIS_PASSAGES[0], *MEMPHIS_PASSAGES[2:])
    return QuestionInstance(
        id="memphis",
        question=MEMPHIS_QUESTION,
        passages=passages,
        answer="48,982",
        question_type="bridge",
        gold_supports={
            ("Memphis Hustle", 0),
            ("Memphis Hustle", 1),
            ("Southaven, Mississippi", 0),
            ("Southaven, Mississippi", 2),
        },
    )


KISS_QUESTION = (
    "What government position was held by the woman who portrayed Corliss Archer in the film Kiss and Tell?"
)
KISS_TITLES = (
    "Kiss and Tell (1945 film)",
    "Shirley Temple",
    "Meet Corliss Archer (TV series)",
    "Meet Corliss Archer",
    "Charles Craft",
)
KISS_OUTPUT = (
    "<title-1> Kiss and Tell (1945 film) <facts-1> <f1> <title-2> Shirley Temple <facts-2> <f2> "
    "<answer> Chief of Protocol of the United States"
)
KISS_PATH = ReasoningPath(
    (Hop("Kiss and Tell (1945 film)", (1,)), Hop("Shirley Temple", (2,))),
    "Chief of Protocol of the United States",
)
KISS_GOLD_ANSWER = "Chief of Protocol"


def synthetic(n: int = 64, distractors: int = 8, seed: int = 0, **kw) -> list[QuestionInstance]:
    return generate_synthetic(SyntheticConfig(num_instances=n, num_distractors=distractors, rng_seed=seed, **kw))


WORDS = ("river", "Paris", "1945", "of", "the", "(film)", "Temple,", "48,982", "St.", "Mary's", "x", "zeta")


def random_path(rng, max_hops: int = 4, max_fact: int = 10) -> ReasoningPath:
    """Well-formed path: 1-4 hops, non-empty titles, facts drawn from 1..max_fact."""
    hops = []
    for _ in range(rng.randint(1, max_hops)):
        title = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 4)))
        facts = tuple(sorted(rng.sample(range(1, max_fact + 1), rng.randint(0, 4))))
        hops.append(Hop(title, facts))
    answer = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 5)))
    return ReasoningPath(tuple(hops), answer)
