"""Prompt templates and the helpers that render model-facing text blocks.

Templates are fixed strings with ``{name}`` placeholders. Only the names a
template declares are substituted; every other brace-enclosed token (JSON
examples, format illustrations like ``{sentence1}``) is left untouched, so
rendering is a single pass with no escaping rules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import MissingVariable
from .model import MCQA, OPTION_LABELS, LineKind, TranscriptLine


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    variables: frozenset[str]

    def render(self, **values: str) -> str:
        for name in sorted(self.variables):
            if name not in values:
                raise MissingVariable(name)
        unknown = set(values) - self.variables
        if unknown:
            raise ValueError(f"undeclared variables: {sorted(unknown)}")
        pattern = re.compile(
            r"\{(" + "|".join(re.escape(n) for n in sorted(self.variables)) + r")\}"
        )
        return pattern.sub(lambda m: str(values[m.group(1)]), self.body)


_CLASSIFY_BODY = """\
You are an expert in analyzing movie scripts. You will be given a list of sentences that appear sequentially in a movie. For each sentence, classify it as either:

- "dialogue" - if it's a spoken line by a character. Music, background chatter, or anything that is not an audio description should also be classified as dialogue
- "AD" - if it's an audio description of what is happening on screen.

Further description:

Dialogue: Spoken lines from a movie, typically involving characters talking.
    Example characteristics:
        - Use of first-person pronouns like "I," "me," or "my."
        - Often conversational or emotional in tone. Could be a command, exclamation, rambling, etc.
        - Examples:
            - "You fought a bear? Are you insane?"
            - "It was either me or him. And honestly, I think I was more scared than he was."
            - "What even possessed you to go into the forest alone?"
            - "Get up"
            - "Move"

Audio Description (AD): Sentences that narrate the visual elements of a movie, intended for blind or visually impaired viewers.
    Example characteristics:
        - Is a narrator describing the scene visually.
        - Descriptive and neutral tone.
        - Often focuses on actions, settings, or appearances.
        - Usually starts describing a scene by setting up the environment like "Outside", "Downstairs", "In a sunny afternoon outside", "Out in the snow", etc.
        - No first-person perspective or conversational cues.
        - Examples:
            - "A dense Russian forest, snow falls steadily, blanketing the ground. A man steps forward, his breath visible in the icy air."
            - "The man lunges at the bear with a crude spear, but the bear swats it aside effortlessly."
            - "He gets up"

Instructions:
1. For every input sentence, return exactly one classification: either "{dialogue_tag}" for dialogue or "{ad_tag}" for Audio Description.
2. Do not skip any inputs, even if they are very short or ambiguous.
3. Match the output count to the input count. If n sentences are given, return exactly n outputs.
4. Do not add any commentary, explanation, or extra lines. Just one output per sentence: "{dialogue_tag}" or "{ad_tag}".
5. Use context between sentences if helpful, since these sentences are sequential from a movie.
6. Some of the movies may be rated for adult audiences and might contain explicit sentences. This makes no difference; the classification should be done regardless just as for any other sentence. Be careful not to include any unsafe or overly sexual content.
7. Some sentences might be a mix of AD and dialogue due to transcription errors. These sentences should be labelled "{ad_tag}" if the audio description part is more prominent in the sentence, otherwise "{dialogue_tag}".

Input format:
1. {sentence1}
2. {sentence2}
3. {sentence3}
4. ...

Output format:
1. {classification1}
2. {classification2}
3. {classification3}
4. ...

Here is the input: {input}
"""

_SEGMENT_BODY = """\
You are a movie editing AI assistant who's job is to segment the movie script into distinct scenes. Each scene is a self contained logical segment of the movie.
You will be provided with two inputs: Movie script and Plot synopsis.

Movie script format:
Line <number>
<start time in hh:mm:ss.ss> --> <end time in hh:mm:ss.ss>
<Sentence type Dialogue or Audio Description>: <sentence>

Plot synopsis format:
<plot synopsis paragraph>

Instructions:
- Segment the script into logical scenes, each spanning approximately few minutes of screen time (based on timestamps or logical transitions in dialogue and descriptions).
- For each scene, list the index range of script lines (e.g., 1-10, 11-18, etc.).
- For each scene, identify which sentence(s) from the plot synopsis match the scene's events, if any. If a scene doesn't match any part of the synopsis, note that no match was found.
- Use timestamps, audio descriptions, and dialogue shifts to define scene boundaries.
- If two script segments are logically distinct (e.g., a sudden change in location or topic), treat them as separate scenes.
- Pay special attention to changes in scenes described in audio descriptions.
- If a plot synopsis line spans across multiple consecutive scenes, then merge the scenes into one.
- Every detail in the plot synopsis should be explainable from the scene. If some detail exists in another consecutive scene, then merge the scenes.
- A scene may have one, multiple, or no corresponding synopsis lines.
- Every plot line must be associated to some scene, and each line can only be associated to at most 1 scene.

Output format:
[
    (<Line number of scene start>, <Line number of scene end>, <Plot synopsis sentence(s) that correspond to the scene OR None>),
    (<Line number of scene start>, <Line number of scene end>, <Plot synopsis sentence(s) that correspond to the scene OR None>),
    ...
]

Input:
Movie Script:
{movie_script}

Plot synopsis:
{plot_synopsis}

Output:
"""

_GEN_VA_BODY = """\
You are given a movie scene in text form, which consists of dialogues and audio descriptions. Your task is to generate questions exclusively based on the audio descriptions, ignoring the dialogues and only using them for context.
Every audio description sentence has to be used to construct 1 or more questions asking about direct facts.
The questions must ask about every factual detail about the audio description sentence.

Examples:
    An AD sentence such as "A green truck speeds through the highway crossing a yellow barrier" can become multiple questions such as "What vehicle is seen on the highway?", "What is the color of the vehicle going on the highway?", "What can be said about the speed of the vehicle on the highway?", "What does the vehicle cross on the highway?", "What color is the barrier on the highway?", etc.
    Audio descriptions that are used to establish the scene such as "Outside", "Later that night", "Inside the home", "Now, inside" can be converted to questions about the scene "Where is the scene taking place?", "What time of day is the scene taking place?", etc.

Question and Answer Format:
Questions: Limited to one or two lines, formulated to be insightful and not overtly indicative of the answer. Avoid using overly descriptive language that could hint at the correct answer. If there are no good questions to be generated, return an empty json.
Answers: Five options per question, formatted as "- A), - B), - C), - D), and - E)", concise and reflective of the question's depth.
Answer Key: Specify the correct answer clearly with the formatting, "Correct Answer:", in the line following all the answer options.
Rationale: Write a rationale explaining the correctness of the "Answer Key" based on the scene's context in the next line.
The response should be in json format without any extra comments.

Very Important Rule: Make sure none of the question is answerable by looking at other questions and their options.

Output format:
Return json formatted text. Example:
[
    {
        "question": "question text1",
        "options": ["A) answer key 1", "B) answer key 2", "C) answer key 3", "D) answer key 4", "E) answer key 5"],
        "correct_answer": "E) answer key 5",
        "rationale": "As specified in the audio description, <rationale>",
    },
    {
        "question": "question text1",
        "options": ["A) answer key 1", "B) answer key 2", "C) answer key 3", "D) answer key 4", "E) answer key 5"],
        "correct_answer": "A) answer key 1",
        "rationale": "As specified in the audio description, <rationale>",
    }
]

Movie scene:
{scene}
"""

_GEN_NU_CMD_BODY = """\
You are a teacher who's job is to create questions out of a 1 line description of a clip from a movie to test narrative understanding of the students. The questions must ask about factual details related to the description.
The description is a 1 line summary, and the students are expected to answer the questions having watched the movie, without seeing the description.

Examples:
    A description such as "The shining spaceship lands on a strange planet covered in glowing blue plants and mist." can be converted into many questions such as , "Where does the spaceship land?" (Answer: On a strange planet), "What makes the planet unusual?" (Answer: The planet is covered in glowing blue plants and mist)
    A description such as "Mark waits alone by the lake after missing the last boat home." can be converted into many questions such as "Who is Mark with waiting by the lake?" (Answer: Mark is alone), "Why is Mark waiting by the lake?" (Answer: Mark missed the last boat home)

Remember that there may be many things happening in the clip from the movie, and the 1 line summary may choose to not highlight them. This may lead to ambiguous questions which should be avoided.

Example of ambiguous question:
    Question such as "What did the spaceship do?" is ambiguous given the description "The shining spaceship lands on a strange planet covered in glowing blue plants and mist.", because the spaceship might have done many things in the clip that were not described in the summary. The students will not know which action the question is asking for out of the many actions the spaceship performed in the clip.
    Question such as "What is the spaceship described as?" is ambiguous given the description "The shining spaceship lands on a strange planet covered in glowing blue plants and mist.", because the word "shining" used to describe the spaceship might exist only in the 1 line summary (to which the students don't have access to), and the spaceship "shining" may have not been the most prominent feature of the spaceship in the movie clip and so the students may consider the question ambiguous.

Question and Answer Format:

Questions: Limited to one or two lines, formulated to be insightful and not overtly indicative of the answer. Avoid using overly descriptive language that could hint at the correct answer.
Answers: Five options per question, formatted as "- A), - B), - C), - D), and - E)", concise and reflective of the question's depth.
Answer Key: Specify the correct answer clearly with the formatting, "Correct Answer:", in the line following all the answer options.
Rationale: Write a rationale explaining the correctness of the "Answer Key" based on the scene's description.

Output format:
Return json formatted text. Example:
[
    {
        "question": "question text1",
        "options": ["A) answer key 1", "B) answer key 2", "C) answer key 3", "D) answer key 4", "E) answer key 5"],
        "correct_answer": "E) answer key 5",
        "rationale": "<rationale>",
    },
    {
        "question": "question text1",
        "options": ["A) answer key 1", "B) answer key 2", "C) answer key 3", "D) answer key 4", "E) answer key 5"],
        "correct_answer": "A) answer key 1",
        "rationale": "<rationale>",
    }
]

Description:
{description}
"""

_GEN_NU_MAD_BODY = """\
You are a teacher who's job is to create questions from plot summary of a clip from a movie to test narrative understanding of the students. The questions must ask about factual details related to the plot.
The students are expected to answer the questions having watched the movie clip, without seeing the plot summary.

Examples:
    - A summary such as "The shining spaceship lands on a strange planet covered in glowing blue plants and mist." can be converted into many questions such as , "Where does the spaceship land?" (Answer: On a strange planet), "What makes the planet unusual?" (Answer: The planet is covered in glowing blue plants and mist)
    - A summary such as "Mark waits alone by the lake after missing the last boat home." can be converted into many questions such as "Who is Mark with waiting by the lake?" (Answer: Mark is alone), "Why is Mark waiting by the lake?" (Answer: Mark missed the last boat home)

Remember that there may be many things happening in the clip from the movie, and the summary may choose to not highlight them. This may lead to ambiguous questions which should be avoided.

Example of ambiguous question:
    - Question such as "What did the spaceship do?" is ambiguous given the summary "The shining spaceship lands on a strange planet covered in glowing blue plants and mist.", because the spaceship might have done many things in the clip that were not described in the summary. The students will not know which action the question is asking for out of the many actions the spaceship performed in the clip.
    - Question such as "What is the spaceship described as?" is ambiguous given the description "The shining spaceship lands on a strange planet covered in glowing blue plants and mist.", because the word "shining" used to describe the spaceship might exist only in the plot summary (to which the students don't have access to), and the spaceship "shining" may have not been the most prominent feature of the spaceship in the movie clip and so the students may consider the question ambiguous.

Question and Answer Format:

Questions: Limited to one or two lines, formulated to be insightful and not overtly indicative of the answer. Avoid using overly descriptive language that could hint at the correct answer.
Answers: Five options per question, formatted as "- A), - B), - C), - D), and - E)", concise and reflective of the question's depth.
Answer Key: Specify the correct answer clearly with the formatting, "Correct Answer:", in the line following all the answer options.
Rationale: Write a rationale explaining the correctness of the "Answer Key" based on the scene's description.

Output format:
Return json formatted text. Example:
[
    {
        "question": "question text1",
        "options": ["A) answer key 1", "B) answer key 2", "C) answer key 3", "D) answer key 4", "E) answer key 5"],
        "correct_answer": "E) answer key 5",
        "rationale": "<rationale>",
    },
    {
        "question": "question text1",
        "options": ["A) answer key 1", "B) answer key 2", "C) answer key 3", "D) answer key 4", "E) answer key 5"],
        "correct_answer": "A) answer key 1",
        "rationale": "<rationale>",
    }
]

Plot summary:
{summary}
"""

_ANSWER_BODY = """\
A series of questions and their options are given below.
{questions_with_choices}

Provide 1 answer to each of the questions based on the following {context_type}.
If {context_type} are not available, then they will not be provided. Also come up with rationale for the answers, quoting the specific (one or more) {context_type} used for answering the question.
If the rationale suggests that the question is answered by directly using {context_type}, then the boolean variable {answered_from_var_name} should be "True".
Otherwise, if the rationale suggests that the question is answered by not using {context_type}, but by prior knowledge or by common sense, then the variable {answered_from_var_name} should be "False".
Always answer {answered_from_var_name} as either "True" with T upper case and "rue" lower case OR "False" with F upper case and "alse" lower case.

{context_type}:
{context}

Instructions
1. Every question has to be answered.
2. There should be 1 and only 1 answer to each question. If no answer is known, take an educated guess. Do not answer the same question more than once.
3. All questions should be answered independently, i.e., you may not use other questions and their options to answer any question.
4. Answer only as in the output format provided:

Output format (substitute the <...> with appropriate values):
[
    {
        "answer": "<answer>" ,
        "rationale": "<rationale>" ,
        "{answered_from_var_name}": "<{answered_from_var_name}>" ,
    },
    ...
]
"""

TEMPLATES: Mapping[str, PromptTemplate] = {
    t.template_id: t
    for t in (
        PromptTemplate(
            "classify", _CLASSIFY_BODY, frozenset({"dialogue_tag", "ad_tag", "input"})
        ),
        PromptTemplate(
            "segment", _SEGMENT_BODY, frozenset({"movie_script", "plot_synopsis"})
        ),
        PromptTemplate("gen_va", _GEN_VA_BODY, frozenset({"scene"})),
        PromptTemplate("gen_nu_cmd", _GEN_NU_CMD_BODY, frozenset({"description"})),
        PromptTemplate("gen_nu_mad", _GEN_NU_MAD_BODY, frozenset({"summary"})),
        PromptTemplate(
            "answer",
            _ANSWER_BODY,
            frozenset(
                {"questions_with_choices", "context_type", "context", "answered_from_var_name"}
            ),
        ),
    )
}


# ---------------------------------------------------------------------------
# Text-block builders


def seconds_to_clock(seconds: float) -> str:
    """Format seconds as hh:mm:ss.ss (centisecond precision)."""
    if seconds < 0:
        raise ValueError("negative time")
    cs = round(seconds * 100)
    h, rem = divmod(cs, 360_000)
    m, rem = divmod(rem, 6_000)
    return f"{h:02d}:{m:02d}:{rem / 100:05.2f}"


_KIND_LABELS = {LineKind.DIALOGUE: "Dialogue", LineKind.AD: "Audio Description"}


def script_lines(lines: Sequence[TranscriptLine]) -> str:
    """Render classified lines as a numbered movie script.

    Numbering is positional starting at 1, so the caller can map a returned
    line number n back to lines[n - 1].
    """
    blocks = []
    for n, ln in enumerate(lines, start=1):
        if ln.kind not in _KIND_LABELS:
            raise ValueError(f"line {ln.index} is unclassified")
        blocks.append(
            f"Line {n}\n"
            f"{seconds_to_clock(ln.start_s)} --> {seconds_to_clock(ln.end_s)}\n"
            f"{_KIND_LABELS[ln.kind]}: {ln.text}"
        )
    return "\n\n".join(blocks)


def numbered_sentences(texts: Sequence[str]) -> str:
    return "\n".join(f"{n}. {t}" for n, t in enumerate(texts, start=1))


def scene_text(lines: Sequence[TranscriptLine]) -> str:
    """Render a scene as labelled dialogue / audio description lines."""
    out = []
    for ln in lines:
        if ln.kind not in _KIND_LABELS:
            raise ValueError(f"line {ln.index} is unclassified")
        out.append(f"{_KIND_LABELS[ln.kind]}: {ln.text}")
    return "\n".join(out)


def questions_with_choices(questions: Sequence[MCQA]) -> str:
    """Render questions and their lettered options for the answering prompt."""
    blocks = []
    for n, q in enumerate(questions, start=1):
        opts = "\n".join(
            f"- {label}) {text}" for label, text in zip(OPTION_LABELS, q.options)
        )
        blocks.append(f"Question {n}: {q.question}\n{opts}")
    return "\n\n".join(blocks)
