"""Exception hierarchy. Each class maps to one CLI exit code."""


class SkillGuardError(Exception):
    exit_code = 1


class DictionaryParseError(SkillGuardError, ValueError):
    """A malformed line in a pronunciation dictionary."""

    exit_code = 2

    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class EmptyCorpusError(SkillGuardError, ValueError):
    exit_code = 3


class OutOfVocabularyError(SkillGuardError, KeyError):
    """Raised when a phrase contains words with no pronunciation."""

    exit_code = 4

    def __init__(self, words):
        self.words = list(words)
        super().__init__(self.words)

    def __str__(self):
        return "out-of-vocabulary words: " + ", ".join(self.words)


class VersionMismatchError(SkillGuardError, ValueError):
    exit_code = 5


class UnknownSkillError(SkillGuardError, KeyError):
    exit_code = 6

    def __str__(self):
        return f"unknown skill id: {self.args[0]!r}"


class DuplicateSkillError(SkillGuardError, ValueError):
    exit_code = 6
