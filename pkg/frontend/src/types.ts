/** Shapes returned by the backend; the client never derives domain numbers. */

export type Band = "red" | "yellow" | "blue";

export interface TopicState {
  topic_id: string;
  topic: string;
  ordinal: number;
  rating: number;
  band: Band;
  cohort_mean: number;
}

export interface KnowledgeStateCurrent {
  mode: "current";
  topics: TopicState[];
}

export interface OverTimePoint {
  date: string;
  ratings: Record<string, number>;
}

export interface KnowledgeStateOverTime {
  mode: "overtime";
  topics: { topic_id: string; topic: string; ordinal: number }[];
  series: OverTimePoint[];
}

export type KnowledgeState = KnowledgeStateCurrent | KnowledgeStateOverTime;

export interface ResourceCard {
  resource_id: string;
  personal_fit: number;
  quality: number | null;
  difficulty: number;
  attempts_count: number;
  comments_count: number;
  kind: string;
  status: string;
  created_at: string;
  tags: string[];
  author_id: string;
  body_preview: string;
  rating_count: number;
}

export interface CommentView {
  author_id: string;
  text: string;
  timestamp: string;
}

export interface ResourceDetail {
  id: string;
  offering_id: string;
  author_id: string;
  kind: string;
  body: string;
  tags: string[];
  status: string;
  created_at: string;
  edited_at: string;
  endorsed: boolean;
  quality: { mean_stars: number | null; count: number };
  comments: CommentView[];
  choices?: string[];
  correct_index?: number;
  explanation?: string;
  answer_distribution?: number[];
  steps?: string[];
  final_solution?: string;
}

export interface AttemptResult {
  attempt_id: string;
  correct: boolean | null;
  scored: boolean;
  correct_index?: number;
  answer_distribution?: number[];
  explanation?: string;
}

export interface Topic {
  id: string;
  name: string;
  ordinal: number;
}

export interface Offering {
  id: string;
  university_name: string;
  course_code: string;
  course_name: string;
  semester: string;
  teaching_start: string;
  moderation_policy: string;
  flag_threshold: number;
  topics: Topic[];
}

export interface EngagementAxes {
  authored: number;
  answered: number;
  rated: number;
  achievements: number;
}

export interface Profile {
  student_id: string;
  engagement: {
    student: EngagementAxes;
    cohort_mean: EngagementAxes;
    cohort_max: EngagementAxes;
  };
  badges: BadgeView[];
}

export interface BadgeView {
  id: string;
  category: "engagement" | "competency";
  tier: "bronze" | "silver" | "gold";
  criterion: string;
  awarded_at: string;
}

export interface Session {
  user_id: string;
  token: string;
  display_name?: string;
}

export interface SearchParams {
  kinds?: string;
  topics?: string;
  status_filter?: string;
  keywords?: string;
  sort_key?: string;
  limit?: number;
}
