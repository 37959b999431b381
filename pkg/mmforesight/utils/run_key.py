class RunKey:
    """
    Identifies one job of an ablation or evaluation sweep. Results are
    reduced in RunKey order whatever order the jobs finish in.
    """

    def __init__(self, subset: str, fold: int = 0, trial: int = -1) -> None:
        self.subset = subset
        self.fold = fold
        self.trial = trial

    def __str__(self) -> str:
        return f"{self.subset} fold={self.fold} trial={self.trial}"

    def sort_key(self):
        return (self.subset, self.fold, self.trial)

    def __lt__(self, o: "RunKey") -> bool:
        return self.sort_key() < o.sort_key()

    def __hash__(self):
        return hash(self.__str__())

    def __eq__(self, o: object) -> bool:
        if not isinstance(o, RunKey):
            return False

        return self.subset == o.subset and self.fold == o.fold and self.trial == o.trial
