"""Deriving concurrency-control classes from data properties.

Every item gets classified in two stages.  Stage one looks only at how the
item is accessed: owned mostly-read data takes exclusive locks (P), shared
mostly-read data runs optimistically (O), everything else is ambiguous.
Stage two resolves the ambiguous items from what their updates mean:
commutative numeric updates that need an up-front success guarantee go to
escrow (E), replayable commutative updates go to reconciliation (R), and
the rest falls back to optimistic validation (O).
"""

from adaptivecc import AccessProperties, SemanticProperties, classify

WHOLESALE = [
    # name                 mr fw un ow   con num com dep in  gua
    ("Customer.name",      (1, 0, 0, 1), None),
    ("Customer.surname",   (1, 0, 0, 1), None),
    ("Customer.id",        (1, 0, 0, 1), None),
    ("Stock.StockId",      (1, 0, 0, 1), None),
    ("Stock.ItemId",       (1, 0, 0, 1), None),
    ("Stock.quantity",     (0, 1, 0, 1), (1, 1, 1, 1, 0, 1)),
    ("Account.debit",      (0, 0, 1, 0), (1, 1, 1, 1, 1, 0)),
    ("Account.credit",     (0, 0, 1, 0), (1, 1, 1, 1, 1, 0)),
    ("Account.limit",      (0, 0, 1, 0), (0, 0, 0, 0, 0, 0)),
    ("Item.name",          (1, 0, 0, 1), None),
    ("Item.unit",          (1, 0, 0, 1), None),
    ("Item.price",         (0, 1, 0, 0), (0, 1, 0, 1, 0, 0)),
]


def main():
    print(f"{'item':<18} {'stage 1':<10} class")
    for name, access_bits, semantic_bits in WHOLESALE:
        access = AccessProperties(*(bool(b) for b in access_bits))
        semantics = (
            SemanticProperties(*(bool(b) for b in semantic_bits))
            if semantic_bits is not None
            else None
        )
        result = classify(access, semantics)
        stage1 = "ambiguous" if result.ambiguous_stage1 else "decided"
        print(f"{name:<18} {stage1:<10} {result.cc_class}")

    print()
    print("The stock quantity ends in E: it is constrained (> 0), numeric,")
    print("commutative, and an order needs the guarantee that the reserved")
    print("amount is still there at commit time.  The account balance ends")
    print("in R: its deltas replay cleanly against whatever the latest")
    print("balance is, and only an overdraft can abort them.")


if __name__ == "__main__":
    main()
