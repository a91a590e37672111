//! Prompt bodies, reproduced byte for byte. Table line breaks are `\n`,
//! typographic quotes are plain `"`, and no body ends with a newline.

pub(super) const CLUSTER_NAME: &str = "Considering the themes and topics from the following TFIDF cluster tag: \"{tfidf_cluster_name}\", please provide a concise and descriptive name for a cluster that includes these {len(paper_list)} academic papers:
{paper_titles_formatted}
Respond with just the cluster name, based on the overarching themes evident in the titles and the TFIDF tag. Don't include the original TFIDF cluster tag and the word \"Cluster\" in your response.";

pub(super) const COMPARE_OBJECTIVES: &str =
    "Please provide a comparative analysis of the objectives of two scientific papers.
Refer the papers with their real ids:
Paper {id_a}'s objective is: {obj1}
Paper {id_b}'s objective is: {obj2}
Highlight the key differences and similarities between Paper {id_a} and Paper {id_b}.
Use simple language.";

pub(super) const COMPARE_RESULTS: &str =
    "Please provide a comparative analysis of the results of two scientific papers.:
Refer the papers with their real ids:
Results of Paper {id_a}: {res1}
Results of Paper {id_b}: {res2}
Highlight the key differences and similarities between Paper {id_a} and Paper {id_b}.
Use simple language.";

pub(super) const COMPARE_TLDR: &str =
    "Please provide a comparative analysis of the TLDR of two scientific papers.:
TLDR of Paper {id_a}: {tldr1}
TLDR of Paper {id_b}: {tldr2}
Highlight the key differences and similarities between Paper {id_a} and Paper {id_b}.
Use simple language.";

pub(super) const TOPIC_CLASSIFICATION: &str = "You are supposed to classify a query into one of the topics provided. These topics are various fields of NLP. Your answer should be in the following format:
**topic name*
Nothing else should be included in the output.
Make sure there is no extra punctuation including full stops, quotation marks or anything of that sort. You are supposed to EXACTLY use the topics from the list provided. If you think it is a random question and not in the field of NLP, then return the topic as \"none\".
You can only provide your answer from the following topics and the topics are:
Multimodality
Natural Language Interfaces
Semantic Text Processing
Semantic Analysis
Syntactic Text Processing
Linguistic and Cognitive NLP
Responsible NLP
Reasoning
Multilinguality
Information Retrieval
Information Extraction and Text Mining
Text Generation
Query: {query}.
Topic:";
