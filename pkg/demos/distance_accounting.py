"""Buffer-entry accounting for the shared classification/detection datapath.

The detector fills one minimum-distance buffer per interferer hypothesis on
the classification window, then reuses the winning buffer for those tones'
LLRs; only the losing buffers are overhead.  This prints the counts per PRB
for each desired alphabet, next to the 22.8% reference figure.
"""

from mumimo import ConstellationKind, count_distances

for kind in (ConstellationKind.QAM4, ConstellationKind.QAM16,
             ConstellationKind.QAM64):
    rep = count_distances(kind)
    print(f"desired alphabet {kind.value} (|M_S| = {rep.ms_size})")
    print(f"  genie detector:        {rep.genie_entries:6d} entries "
          f"({rep.data_tones} data tones x {rep.ms_size})")
    print(f"  classify + detect:     {rep.joint_entries:6d} entries "
          f"({rep.classification_tones} window tones x "
          f"{len(rep.hypothesis_sizes)} hypotheses, rest single-buffer)")
    print(f"  reused for LLRs:       {rep.reused_entries:6d} entries")
    print(f"  overhead:              {rep.overhead_pct:6.2f}%  "
          f"(reference figure: {rep.reference_overhead_pct}%)")
    print()

print(count_distances(ConstellationKind.QAM64).convention)
