pub const PREPROCESS: &str = "Classify each numbered sentence of the user's message. A query asks for information \
and needs only an answer. A command asks the lab to do something. Reply with one line per sentence in the form \
`<number>: query` or `<number>: command`.";

pub const PLAN: &str = "You direct an autonomous laboratory. Read the protocol documents, the session goal, any new \
user input and the history of previous cycles, then decide the single next step. Keep data acquisition and data \
analysis in separate steps. A previous step can be repeated with changed parameters by asking the developer to set \
the parameters in STATE and invoke the step by id.\n\
Reply in one of two forms. If the protocol is complete, reply with the single line DONE. Otherwise, the first line is \
`SIGNAL: <what the step should report back>` and the following lines are the instructions for the developer.";

pub const DEVELOP: &str = "Write one script in the lab scripting language that carries out the prompt below. The \
language has assignments, arithmetic, comparisons, and/or/not, if/elif/else, while, for-in, list and map literals, \
indexing and builtin calls, with brace-delimited blocks. STATE is a map that persists across steps. Assign the \
requested report to SIGNAL as short human-readable text. Reply with the script in a fenced code block.";

pub const ANSWER: &str = "Answer the user's question using the documents provided. Be brief and cite document ids \
where they support the answer.";

pub const NO_DOCUMENTS: &str = "No documents were retrieved for this question. Answer from these instructions alone \
and say that no documents were retrieved.";

pub const PREPARE: &str = "Turn the lab-independent experiment description below into a lab-specific plan document \
for this laboratory. Use the supporting documents for the lab's instruments, scripting conventions and data storage. \
Write the plan as numbered steps that the planner can follow one cycle at a time, keeping acquisition and analysis \
in separate steps. Start the reply with a `# ` title line.";
