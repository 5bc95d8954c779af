"""
Paired multimodal augmentation: join an augmented text and an augmented image of the same
parent into one sample carrying both (e.g. back-translated text with a Real Guidance image).

Children of one parent are paired in record order, i-th text with i-th image; surplus
children on either side stay unpaired.
"""

from collections import defaultdict

from dataset.schema import MultimodalSample, Provenance
from augment.records import TEXT_METHODS, IMAGE_METHODS, AugMethod, AugmentationRecord, ChildCounter, Verdict


def _children(records, methods) -> dict[str, list[AugmentationRecord]]:
    by_parent = defaultdict(list)
    for r in records:
        if r.accepted:
            if r.method not in methods:
                raise ValueError(f"{r.new_sample.sample_id}: unexpected method {r.method}")
            by_parent[r.parent_id].append(r)
    return by_parent


def pair_augmentations(text_records, image_records, existing_ids=()) -> list[AugmentationRecord]:
    text_records = list(text_records)
    image_records = list(image_records)
    texts = _children(text_records, TEXT_METHODS)
    images = _children(image_records, IMAGE_METHODS)

    known = [*existing_ids, *texts.keys(), *images.keys()]
    known += [r.new_sample.sample_id for rs in (*texts.values(), *images.values()) for r in rs]
    ids = ChildCounter(known)

    out = []
    for parent_id, text_children in texts.items():
        for t, i in zip(text_children, images.get(parent_id, [])):
            ts, im = t.new_sample, i.new_sample
            out.append(AugmentationRecord(
                parent_id=parent_id,
                method=AugMethod.PAIRED,
                params={
                    "text_method":  t.method.value,
                    "text_sample":  ts.sample_id,
                    "image_method": i.method.value,
                    "image_sample": im.sample_id,
                },
                verdict=Verdict.accepted(),
                new_sample=MultimodalSample(
                    sample_id=ids.next(parent_id),
                    tweet_text=ts.tweet_text,
                    image_ref=im.image_ref,
                    label=ts.label,
                    split=ts.split,
                    provenance=Provenance.AUGMENTED,
                    parent_id=parent_id,
                ),
            ))
    return out
