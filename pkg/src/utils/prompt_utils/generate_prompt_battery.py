import numpy as np

from .prompt import Prompt

NUMBER_LENGTHS = (3, 9, 12)
NUMBERS_PER_LENGTH = 10
PASSWORD_COUNT = 20
PASSWORD_LENGTH_RANGE = (10, 17)
SENTENCE_WORD_COUNTS = (3, 6, 9)
SENTENCES_PER_COUNT = 5

PASSWORD_PUNCTUATION = "-=@#;'!,.?"

WORDS = (
    "able about after again air all also animal answer apple around back ball bank "
    "before best bird black blue boat book both bring build call came camp city "
    "cold come could dark day deep dog door down draw each early earth east easy "
    "end even every eye face fall farm fast field fire fish five food foot form "
    "four free friend from game girl give gold good great green ground group grow "
    "hand happy hard head hear help high hill hold home horse house idea just keep "
    "kind king land large last late learn leave left letter light line list little "
    "live long look made make many map mark may mean milk mind money moon more "
    "most mother move much music name near never next night north note number "
    "ocean often old only open order other over page paper park part people pick "
    "place plan plant play point power press quick quiet rain read real red river "
    "road rock room round run safe same school sea seven ship short show side sign "
    "simple sing small snow some song soon sound south space stand star start stay "
    "step still stone story street strong sun table take talk tall ten than then "
    "there thing think three time today together told took town tree true turn two "
    "under until upon use very voice walk wall want warm watch water wave week well "
    "west white whole wide wind window winter with wood word work world write year "
    "yellow young"
).split()


def _number(rng: np.random.Generator, length: int) -> str:
    return "".join(str(d) for d in rng.integers(0, 10, size=length))


def _password(rng: np.random.Generator) -> str:
    lo, hi = PASSWORD_LENGTH_RANGE
    target = int(rng.integers(lo, hi + 1))
    n_digits = int(rng.integers(2, 5))
    word_len = target - 1 - n_digits

    word = ""
    while len(word) < word_len:
        word += str(rng.choice(WORDS))
    punct = PASSWORD_PUNCTUATION[int(rng.integers(len(PASSWORD_PUNCTUATION)))]
    return word[:word_len] + punct + _number(rng, n_digits)


def _sentence(rng: np.random.Generator, n_words: int) -> str:
    return " ".join(str(w) for w in rng.choice(WORDS, size=n_words))


def generate_prompt_battery(seed: int) -> list[Prompt]:
    """Numbers (10 each of 3/9/12 digits), 20 passwords of 10-17 chars and 15 sentences of 3/6/9 words."""
    rng = np.random.default_rng(seed)
    battery: list[Prompt] = []
    for length in NUMBER_LENGTHS:
        battery += [Prompt("numbers", _number(rng, length)) for _ in range(NUMBERS_PER_LENGTH)]
    battery += [Prompt("password", _password(rng)) for _ in range(PASSWORD_COUNT)]
    for n_words in SENTENCE_WORD_COUNTS:
        battery += [Prompt("sentence", _sentence(rng, n_words)) for _ in range(SENTENCES_PER_COUNT)]
    return battery
